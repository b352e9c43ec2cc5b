#pragma once

// Helpers for native (C++) implementations of builtins, methods and modules.

#include "interpreter.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace dynact::minipy {

// Positional-or-keyword argument access for native callables.
class ArgReader {
public:
    ArgReader(Interp& in, std::string_view fname, Args& args, Kwargs& kwargs)
        : in_(in), fname_(fname), args_(args), kwargs_(kwargs)
    {
    }

    std::optional<Value> opt(std::size_t pos, std::string_view name) const;
    Value get(std::size_t pos, std::string_view name) const;
    void at_most(std::size_t n) const;

    std::size_t positional() const { return args_.size(); }

private:
    Interp& in_;
    std::string_view fname_;
    Args& args_;
    Kwargs& kwargs_;
};

std::string expect_str(Interp& in, const Value& v, std::string_view context);
std::int64_t expect_int(Interp& in, const Value& v, std::string_view context);
double expect_float(Interp& in, const Value& v, std::string_view context);
std::int64_t length_of(Interp& in, const Value& v);

}  // namespace dynact::minipy
