#pragma once

// A small interpreter for a Python subset, used as the in-process stand-in for
// the kernel worker. It keeps a persistent namespace across snippets, captures
// output, reports the top-level functions each snippet defines, and enforces a
// cooperative wall-clock deadline.
//
// Supported: functions (defaults, *args, **kwargs, closures, lambdas), if/for/
// while/try/with, comprehensions, f-strings, str.format, int/float/str/list/
// tuple/dict/set, file I/O through open(), and the math, os, os.path, json,
// re and csv modules. Any other import binds a placeholder whose first use
// raises ModuleNotFoundError. Integers are 64-bit; overflow raises
// OverflowError. Classes, generators and async are not supported.

#include "dynact/core.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dynact::minipy {

class SyntaxError : public Error {
public:
    SyntaxError(std::string message, int line);
    int line() const { return line_; }
    const std::string& bare_message() const { return bare_; }

private:
    std::string bare_;
    int line_;
};

struct FunctionInfo {
    std::string name;
    std::string docstring;
    std::string source;
    int complexity = 1;
    int line = 0;
};

struct Analysis {
    std::vector<FunctionInfo> functions;        // top-level definitions, in order
    std::vector<std::string> all_definitions;   // every def and lambda at any depth
    std::vector<std::string> call_targets;      // callee names, dotted for attributes
};

/// Parses `code` and reports its definitions and call targets without running
/// it. Throws SyntaxError.
Analysis analyze(std::string_view code);

/// 1 + decision points (if/elif, conditional expressions, loops including
/// comprehension clauses, except handlers, and/or operators, comprehension
/// filters). `function_source` must hold exactly one top-level function.
/// Throws AnalysisError.
int cyclomatic_complexity(std::string_view function_source);

struct ErrorInfo {
    std::string type;
    std::string message;
    std::string traceback;
};

struct Outcome {
    bool ok = true;
    std::string stdout_text;
    std::optional<std::string> result_repr;
    std::optional<std::string> final_answer;
    std::optional<ErrorInfo> error;
    std::vector<FunctionInfo> defined_functions;
    bool timed_out = false;
    bool crashed = false;  // the snippet called os._exit
    int exit_code = 0;
};

struct Hooks {
    // Backs get_relevant_actions(query, k=None); returns observation text.
    std::function<std::string(const std::string& query, std::optional<std::int64_t> k)> retrieve;
};

inline constexpr std::size_t stdout_capture_limit = 1 << 20;

class Interpreter {
public:
    explicit Interpreter(Hooks hooks = {});
    ~Interpreter();
    Interpreter(const Interpreter&) = delete;
    Interpreter& operator=(const Interpreter&) = delete;

    using Deadline = std::optional<std::chrono::steady_clock::time_point>;

    /// Runs `code` in the persistent namespace. When `display_result` is set
    /// and the last statement is an expression, its repr is reported.
    Outcome exec(std::string_view code, Deadline deadline = std::nullopt, bool display_result = true);

    /// Fresh namespace with the framework hooks reinstalled.
    void reset();

    bool has_name(const std::string& name) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace dynact::minipy
