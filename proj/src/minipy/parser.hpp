#pragma once

#include "ast.hpp"
#include "dynact/minipy.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace dynact::minipy {

/// Parses a whole snippet. Throws SyntaxError.
std::shared_ptr<Module> parse_module(std::string_view source);

/// inspect.cleandoc-style docstring normalization.
std::string clean_docstring(std::string_view raw);

}  // namespace dynact::minipy
