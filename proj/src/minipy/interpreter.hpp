#pragma once

#include "ast.hpp"
#include "dynact/minipy.hpp"
#include "value.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dynact::minipy {

struct TraceFrame {
    std::string function;
    int line = 0;
    const Module* module = nullptr;
};

// A raised action-language exception, propagated as a C++ exception.
struct PyError {
    std::string type;
    std::string message;
    std::vector<TraceFrame> trace;
};

// Not catchable from action code.
struct TimeoutSignal {};
struct CrashSignal {
    int code = 0;
};

struct Scope : std::enable_shared_from_this<Scope> {
    std::unordered_map<std::string, Value> vars;
    std::shared_ptr<Scope> parent;
    std::unordered_set<std::string> global_names;
};

enum class Flow { normal, brk, cont, ret };

class Interp {
public:
    explicit Interp(Hooks hooks);

    void reset();
    Outcome run(std::string_view code, Interpreter::Deadline deadline, bool display_result);

    // --- used by builtins ------------------------------------------------
    [[noreturn]] void raise(std::string type, std::string message);
    void check_deadline(bool force = false);
    Value call(const Value& fn, Args args, Kwargs kwargs = {});
    void for_each(const Value& iterable, const std::function<bool(const Value&)>& body);
    std::vector<Value> to_vector(const Value& iterable);
    Value getattr(const Value& obj, const std::string& name);
    Value binop(BinOpKind op, const Value& a, const Value& b);
    bool compare(CmpKind op, const Value& a, const Value& b);
    bool less(const Value& a, const Value& b);
    bool contains(const Value& container, const Value& item);
    Value subscript(const Value& obj, const Value& index);
    void write_stdout(std::string_view text);
    std::int64_t to_index(const Value& v);

    std::unordered_map<std::string, Value> builtins;
    std::optional<std::string> pending_final_answer;
    Hooks hooks;

private:
    Value eval(const Expr& e, Scope& scope);
    Flow exec_block(const Block& block, Scope& scope);
    Flow exec_stmt(const Stmt& stmt, Scope& scope);
    Flow exec_try(const Try& t, Scope& scope);
    Value lookup(const std::string& name, Scope& scope);
    void store_name(const std::string& name, Value v, Scope& scope);
    void assign(const Expr& target, Value v, Scope& scope);
    void del(const Expr& target, Scope& scope);
    Value call_function(const std::shared_ptr<FunctionObj>& fn, Args args, Kwargs kwargs);
    Value make_function(const FunctionDef& def, Scope& scope);
    Value make_lambda(const LambdaExpr& lambda, Scope& scope);
    std::vector<Value> eval_defaults(const std::vector<Param>& params, Scope& scope);
    Value eval_call(const Call& c, Scope& scope);
    Value eval_comprehension(const Comprehension& c, Scope& scope);
    Value eval_fstring(const FString& f, Scope& scope);
    Value slice(const Value& obj, const Slice& s, Scope& scope);
    void do_import(const Import& imp, Scope& scope);
    void do_import_from(const ImportFrom& imp, Scope& scope);
    Value import_module(const std::string& dotted);
    bool exception_matches(const std::string& raised, const Value& handler_type);
    std::string format_traceback(const PyError& e) const;

    std::shared_ptr<Scope> globals_;
    std::shared_ptr<const Module> current_module_;
    std::unordered_map<std::string, Value> module_cache_;
    std::vector<TraceFrame> stack_;
    std::vector<PyError> handling_;  // exceptions being handled, for bare raise
    std::string out_;
    bool out_truncated_ = false;
    Interpreter::Deadline deadline_;
    std::uint32_t ticks_ = 0;
    Value return_value_;
};

// builtins.cpp
void install_builtins(Interp& in);
std::optional<Value> make_module(Interp& in, const std::string& name);
Value get_method(Interp& in, const Value& self, const std::string& name);
std::string format_with_spec(Interp& in, const Value& v, std::string_view spec);
std::string percent_format(Interp& in, const std::string& fmt, const Value& args);
bool is_exception_subclass(const std::string& type, const std::string& base);

}  // namespace dynact::minipy
