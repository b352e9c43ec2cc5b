#include "interpreter.hpp"

#include "parser.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include <fmt/format.h>

namespace dynact::minipy {

FunctionInfo describe_function(const FunctionDef& def, const Module& module);

namespace {

constexpr std::size_t max_call_depth = 200;
constexpr std::int64_t max_sequence_size = 50'000'000;

struct FrameGuard {
    std::vector<TraceFrame>& stack;
    ~FrameGuard() { stack.pop_back(); }
};

std::int64_t as_int(const Value& v)
{
    return v.is<bool>() ? std::int64_t{v.as<bool>()} : v.as<std::int64_t>();
}

bool is_intlike(const Value& v)
{
    return v.is<std::int64_t>() || v.is<bool>();
}

double as_float(const Value& v)
{
    return v.is<double>() ? v.as<double>() : static_cast<double>(as_int(v));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b)
{
    std::int64_t r = a % b;
    if (r != 0 && ((r < 0) != (b < 0)))
        r += b;
    return r;
}

const char* binop_symbol(BinOpKind op)
{
    switch (op) {
    case BinOpKind::add: return "+";
    case BinOpKind::sub: return "-";
    case BinOpKind::mul: return "*";
    case BinOpKind::div: return "/";
    case BinOpKind::floordiv: return "//";
    case BinOpKind::mod: return "%";
    case BinOpKind::pow: return "** or pow()";
    case BinOpKind::bitand_: return "&";
    case BinOpKind::bitor_: return "|";
    case BinOpKind::bitxor: return "^";
    case BinOpKind::lshift: return "<<";
    case BinOpKind::rshift: return ">>";
    }
    return "?";
}

const std::vector<Value>* sequence_items(const Value& v)
{
    if (v.is<std::shared_ptr<ListObj>>())
        return &v.as<std::shared_ptr<ListObj>>()->items;
    if (v.is<std::shared_ptr<TupleObj>>())
        return &v.as<std::shared_ptr<TupleObj>>()->items;
    return nullptr;
}

}  // namespace

Interp::Interp(Hooks h) : hooks(std::move(h))
{
    reset();
}

void Interp::reset()
{
    globals_ = std::make_shared<Scope>();
    module_cache_.clear();
    builtins.clear();
    install_builtins(*this);
    pending_final_answer.reset();
    handling_.clear();
    stack_.clear();
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

Outcome Interp::run(std::string_view code, Interpreter::Deadline deadline, bool display_result)
{
    Outcome result;
    out_.clear();
    out_truncated_ = false;
    deadline_ = deadline;
    ticks_ = 0;
    pending_final_answer.reset();
    stack_.clear();
    handling_.clear();

    std::shared_ptr<Module> module;
    try {
        module = parse_module(code);
    } catch (const SyntaxError& e) {
        result.ok = false;
        std::string src_line;
        std::string_view rest = code;
        for (int i = 1; i < e.line() && rest.find('\n') != std::string_view::npos; ++i)
            rest.remove_prefix(rest.find('\n') + 1);
        src_line = std::string(rest.substr(0, rest.find('\n')));
        result.error = ErrorInfo{"SyntaxError", e.what(),
                                 fmt::format("  File \"<action>\", line {}\n    {}\nSyntaxError: {}", e.line(),
                                             src_line, e.bare_message())};
        return result;
    }

    current_module_ = module;
    stack_.push_back(TraceFrame{"<module>", 0, module.get()});
    try {
        const auto& body = module->body;
        for (std::size_t i = 0; i < body.size(); ++i) {
            const Stmt& st = *body[i];
            auto* expr = std::get_if<ExprStmt>(&st.node);
            if (display_result && expr && i + 1 == body.size()) {
                check_deadline();
                stack_.back().line = st.line;
                Value v = eval(*expr->value, *globals_);
                if (!v.is_none())
                    result.result_repr = repr(v);
                continue;
            }
            Flow flow = exec_stmt(st, *globals_);
            if (flow == Flow::ret)
                raise("SyntaxError", "'return' outside function");
            if (flow != Flow::normal)
                raise("SyntaxError", "'break' or 'continue' outside loop");
        }
        for (const auto& st : body)
            if (auto* def = std::get_if<FunctionDef>(&st->node))
                result.defined_functions.push_back(describe_function(*def, *module));
        result.final_answer = pending_final_answer;
    } catch (const PyError& e) {
        result.ok = false;
        result.error = ErrorInfo{e.type, e.message, format_traceback(e)};
        result.result_repr.reset();
    } catch (const TimeoutSignal&) {
        result.ok = false;
        result.timed_out = true;
        result.error = ErrorInfo{"Timeout", "execution exceeded the time limit", ""};
    } catch (const CrashSignal& c) {
        result.ok = false;
        result.crashed = true;
        result.exit_code = c.code;
        result.error = ErrorInfo{"WorkerCrashed", fmt::format("worker exited with code {}", c.code), ""};
    }
    pending_final_answer.reset();
    stack_.clear();
    result.stdout_text = std::move(out_);
    if (out_truncated_)
        result.stdout_text += fmt::format("\n...[stdout truncated at {} bytes]\n", stdout_capture_limit);
    out_.clear();
    return result;
}

std::string Interp::format_traceback(const PyError& e) const
{
    std::string tb = "Traceback (most recent call last):\n";
    for (const auto& f : e.trace) {
        tb += fmt::format("  File \"<action>\", line {}, in {}\n", f.line, f.function);
        if (f.module && f.line >= 1 && f.line <= static_cast<int>(f.module->lines.size())) {
            std::string text = f.module->lines[static_cast<std::size_t>(f.line - 1)];
            auto first = text.find_first_not_of(" \t");
            if (first != std::string::npos)
                tb += "    " + text.substr(first) + "\n";
        }
    }
    tb += e.message.empty() ? e.type : fmt::format("{}: {}", e.type, e.message);
    return tb;
}

// ---------------------------------------------------------------------------
// Support
// ---------------------------------------------------------------------------

void Interp::raise(std::string type, std::string message)
{
    throw PyError{std::move(type), std::move(message), stack_};
}

void Interp::check_deadline(bool force)
{
    if (deadline_ && ((++ticks_ & 0x3FF) == 0 || force) && std::chrono::steady_clock::now() > *deadline_)
        throw TimeoutSignal{};
}

void Interp::write_stdout(std::string_view text)
{
    if (out_truncated_)
        return;
    if (out_.size() + text.size() > stdout_capture_limit) {
        out_.append(text.substr(0, stdout_capture_limit - out_.size()));
        out_truncated_ = true;
        return;
    }
    out_.append(text);
}

std::int64_t Interp::to_index(const Value& v)
{
    if (!is_intlike(v))
        raise("TypeError", fmt::format("indices must be integers, not {}", type_name(v)));
    return as_int(v);
}

Value Interp::lookup(const std::string& name, Scope& scope)
{
    if (&scope != globals_.get() && !scope.global_names.count(name)) {
        for (Scope* p = &scope; p; p = p->parent.get()) {
            auto it = p->vars.find(name);
            if (it != p->vars.end())
                return it->second;
        }
    }
    if (auto it = globals_->vars.find(name); it != globals_->vars.end())
        return it->second;
    if (auto it = builtins.find(name); it != builtins.end())
        return it->second;
    raise("NameError", fmt::format("name '{}' is not defined", name));
}

void Interp::store_name(const std::string& name, Value v, Scope& scope)
{
    if (&scope != globals_.get() && scope.global_names.count(name))
        globals_->vars[name] = std::move(v);
    else
        scope.vars[name] = std::move(v);
}

void Interp::for_each(const Value& iterable, const std::function<bool(const Value&)>& body)
{
    auto step = [&](const Value& v) {
        check_deadline();
        return body(v);
    };
    if (iterable.is<std::shared_ptr<ListObj>>()) {
        auto list = iterable.as<std::shared_ptr<ListObj>>();
        for (std::size_t i = 0; i < list->items.size(); ++i) {
            Value item = list->items[i];
            if (!step(item))
                return;
        }
    } else if (iterable.is<std::shared_ptr<TupleObj>>()) {
        auto tuple = iterable.as<std::shared_ptr<TupleObj>>();
        for (const auto& item : tuple->items)
            if (!step(item))
                return;
    } else if (iterable.is<std::string>()) {
        std::string s = iterable.as<std::string>();
        for (char c : s)
            if (!step(Value(std::string(1, c))))
                return;
    } else if (iterable.is<std::shared_ptr<DictObj>>()) {
        std::vector<Value> keys;
        for (auto& [k, v] : iterable.as<std::shared_ptr<DictObj>>()->entries)
            keys.push_back(k);
        for (const auto& k : keys)
            if (!step(k))
                return;
    } else if (iterable.is<std::shared_ptr<RangeObj>>()) {
        auto r = iterable.as<std::shared_ptr<RangeObj>>();
        std::int64_t n = r->size();
        for (std::int64_t i = 0; i < n; ++i)
            if (!step(Value(r->at(i))))
                return;
    } else if (iterable.is<std::shared_ptr<FileObj>>()) {
        auto f = iterable.as<std::shared_ptr<FileObj>>();
        if (f->closed)
            raise("ValueError", "I/O operation on closed file.");
        while (f->pos < f->content.size()) {
            auto nl = f->content.find('\n', f->pos);
            std::size_t end = nl == std::string::npos ? f->content.size() : nl + 1;
            std::string line = f->content.substr(f->pos, end - f->pos);
            f->pos = end;
            if (!step(Value(std::move(line))))
                return;
        }
    } else {
        raise("TypeError", fmt::format("'{}' object is not iterable", type_name(iterable)));
    }
}

std::vector<Value> Interp::to_vector(const Value& iterable)
{
    if (auto* items = sequence_items(iterable))
        return *items;
    std::vector<Value> out;
    for_each(iterable, [&](const Value& v) {
        out.push_back(v);
        return true;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

Value Interp::binop(BinOpKind op, const Value& a, const Value& b)
{
    auto unsupported = [&]() -> Value {
        raise("TypeError", fmt::format("unsupported operand type(s) for {}: '{}' and '{}'", binop_symbol(op),
                                       type_name(a), type_name(b)));
    };
    auto overflow = [&]() -> Value {
        raise("OverflowError", "integer result exceeds the 64-bit range supported by this executor");
    };

    bool ints = is_intlike(a) && is_intlike(b);
    bool nums = a.is_number() && b.is_number();

    switch (op) {
    case BinOpKind::add:
        if (ints) {
            std::int64_t r;
            if (__builtin_add_overflow(as_int(a), as_int(b), &r))
                return overflow();
            return Value(r);
        }
        if (nums)
            return Value(as_float(a) + as_float(b));
        if (a.is<std::string>() && b.is<std::string>())
            return Value(a.as<std::string>() + b.as<std::string>());
        if (a.is<std::shared_ptr<ListObj>>() && b.is<std::shared_ptr<ListObj>>()) {
            auto items = a.as<std::shared_ptr<ListObj>>()->items;
            auto& more = b.as<std::shared_ptr<ListObj>>()->items;
            items.insert(items.end(), more.begin(), more.end());
            return make_list(std::move(items));
        }
        if (a.is<std::shared_ptr<TupleObj>>() && b.is<std::shared_ptr<TupleObj>>()) {
            auto items = a.as<std::shared_ptr<TupleObj>>()->items;
            auto& more = b.as<std::shared_ptr<TupleObj>>()->items;
            items.insert(items.end(), more.begin(), more.end());
            return make_tuple(std::move(items));
        }
        if (a.is<std::string>())
            raise("TypeError", fmt::format("can only concatenate str (not \"{}\") to str", type_name(b)));
        return unsupported();
    case BinOpKind::sub:
        if (ints) {
            std::int64_t r;
            if (__builtin_sub_overflow(as_int(a), as_int(b), &r))
                return overflow();
            return Value(r);
        }
        if (nums)
            return Value(as_float(a) - as_float(b));
        if (a.is<std::shared_ptr<DictObj>>() && b.is<std::shared_ptr<DictObj>>() &&
            a.as<std::shared_ptr<DictObj>>()->is_set) {
            Value out = make_set();
            auto& o = *out.as<std::shared_ptr<DictObj>>();
            for (auto& [k, v] : a.as<std::shared_ptr<DictObj>>()->entries)
                if (!b.as<std::shared_ptr<DictObj>>()->find(k))
                    o.set(k, none);
            return out;
        }
        return unsupported();
    case BinOpKind::mul: {
        if (ints) {
            std::int64_t r;
            if (__builtin_mul_overflow(as_int(a), as_int(b), &r))
                return overflow();
            return Value(r);
        }
        if (nums)
            return Value(as_float(a) * as_float(b));
        const Value* seq = nullptr;
        const Value* count = nullptr;
        if (is_intlike(b)) {
            seq = &a;
            count = &b;
        } else if (is_intlike(a)) {
            seq = &b;
            count = &a;
        }
        if (!seq)
            return unsupported();
        std::int64_t n = std::max<std::int64_t>(0, as_int(*count));
        if (seq->is<std::string>()) {
            const auto& s = seq->as<std::string>();
            if (static_cast<double>(s.size()) * static_cast<double>(n) > max_sequence_size)
                raise("MemoryError", "");
            std::string out;
            for (std::int64_t i = 0; i < n; ++i)
                out += s;
            return Value(std::move(out));
        }
        if (auto* items = sequence_items(*seq)) {
            if (static_cast<double>(items->size()) * static_cast<double>(n) > max_sequence_size)
                raise("MemoryError", "");
            std::vector<Value> out;
            for (std::int64_t i = 0; i < n; ++i)
                out.insert(out.end(), items->begin(), items->end());
            return seq->is<std::shared_ptr<ListObj>>() ? make_list(std::move(out)) : make_tuple(std::move(out));
        }
        return unsupported();
    }
    case BinOpKind::div:
        if (!nums)
            return unsupported();
        if (as_float(b) == 0.0)
            raise("ZeroDivisionError", "division by zero");
        return Value(as_float(a) / as_float(b));
    case BinOpKind::floordiv:
        if (ints) {
            if (as_int(b) == 0)
                raise("ZeroDivisionError", "integer division or modulo by zero");
            if (as_int(a) == INT64_MIN && as_int(b) == -1)
                return overflow();
            return Value(floor_div(as_int(a), as_int(b)));
        }
        if (nums) {
            if (as_float(b) == 0.0)
                raise("ZeroDivisionError", "float floor division by zero");
            return Value(std::floor(as_float(a) / as_float(b)));
        }
        return unsupported();
    case BinOpKind::mod:
        if (a.is<std::string>())
            return Value(percent_format(*this, a.as<std::string>(), b));
        if (ints) {
            if (as_int(b) == 0)
                raise("ZeroDivisionError", "integer division or modulo by zero");
            if (as_int(b) == -1)
                return Value(std::int64_t{0});
            return Value(floor_mod(as_int(a), as_int(b)));
        }
        if (nums) {
            double x = as_float(a), y = as_float(b);
            if (y == 0.0)
                raise("ZeroDivisionError", "float modulo");
            double r = std::fmod(x, y);
            if (r != 0.0 && ((r < 0) != (y < 0)))
                r += y;
            return Value(r);
        }
        return unsupported();
    case BinOpKind::pow:
        if (ints && as_int(b) >= 0) {
            std::int64_t base = as_int(a), exp = as_int(b), result = 1;
            while (exp > 0) {
                if (exp & 1) {
                    if (__builtin_mul_overflow(result, base, &result))
                        return overflow();
                }
                exp >>= 1;
                if (exp > 0 && __builtin_mul_overflow(base, base, &base))
                    return overflow();
            }
            return Value(result);
        }
        if (nums) {
            if (as_float(a) == 0.0 && as_float(b) < 0)
                raise("ZeroDivisionError", "0.0 cannot be raised to a negative power");
            return Value(std::pow(as_float(a), as_float(b)));
        }
        return unsupported();
    case BinOpKind::bitand_:
    case BinOpKind::bitor_:
    case BinOpKind::bitxor:
        if (ints) {
            std::int64_t x = as_int(a), y = as_int(b);
            std::int64_t r = op == BinOpKind::bitand_ ? (x & y) : op == BinOpKind::bitor_ ? (x | y) : (x ^ y);
            if (a.is<bool>() && b.is<bool>())
                return Value(r != 0);
            return Value(r);
        }
        if (a.is<std::shared_ptr<DictObj>>() && b.is<std::shared_ptr<DictObj>>() &&
            a.as<std::shared_ptr<DictObj>>()->is_set && b.as<std::shared_ptr<DictObj>>()->is_set) {
            auto& x = *a.as<std::shared_ptr<DictObj>>();
            auto& y = *b.as<std::shared_ptr<DictObj>>();
            Value out = make_set();
            auto& o = *out.as<std::shared_ptr<DictObj>>();
            if (op == BinOpKind::bitand_) {
                for (auto& [k, v] : x.entries)
                    if (y.find(k))
                        o.set(k, none);
            } else if (op == BinOpKind::bitor_) {
                for (auto& [k, v] : x.entries)
                    o.set(k, none);
                for (auto& [k, v] : y.entries)
                    o.set(k, none);
            } else {
                for (auto& [k, v] : x.entries)
                    if (!y.find(k))
                        o.set(k, none);
                for (auto& [k, v] : y.entries)
                    if (!x.find(k))
                        o.set(k, none);
            }
            return out;
        }
        return unsupported();
    case BinOpKind::lshift:
    case BinOpKind::rshift:
        if (ints) {
            std::int64_t x = as_int(a), y = as_int(b);
            if (y < 0)
                raise("ValueError", "negative shift count");
            if (op == BinOpKind::rshift)
                return Value(y >= 63 ? (x < 0 ? -1 : 0) : (x >> y));
            if (y >= 63 || (x != 0 && (std::abs(x) >> (62 - y)) != 0))
                return overflow();
            return Value(x << y);
        }
        return unsupported();
    }
    return unsupported();
}

bool Interp::less(const Value& a, const Value& b)
{
    if (a.is_number() && b.is_number()) {
        if (is_intlike(a) && is_intlike(b))
            return as_int(a) < as_int(b);
        return as_float(a) < as_float(b);
    }
    if (a.is<std::string>() && b.is<std::string>())
        return a.as<std::string>() < b.as<std::string>();
    auto* x = sequence_items(a);
    auto* y = sequence_items(b);
    if (x && y && a.v.index() == b.v.index()) {
        for (std::size_t i = 0; i < std::min(x->size(), y->size()); ++i) {
            if (equals((*x)[i], (*y)[i]))
                continue;
            return less((*x)[i], (*y)[i]);
        }
        return x->size() < y->size();
    }
    raise("TypeError", fmt::format("'<' not supported between instances of '{}' and '{}'", type_name(a),
                                   type_name(b)));
}

bool Interp::contains(const Value& container, const Value& item)
{
    if (container.is<std::string>()) {
        if (!item.is<std::string>())
            raise("TypeError",
                  fmt::format("'in <string>' requires string as left operand, not {}", type_name(item)));
        return container.as<std::string>().find(item.as<std::string>()) != std::string::npos;
    }
    if (auto* items = sequence_items(container)) {
        return std::any_of(items->begin(), items->end(), [&](const Value& v) { return equals(v, item); });
    }
    if (container.is<std::shared_ptr<DictObj>>()) {
        if (!hash_key(item))
            raise("TypeError", fmt::format("unhashable type: '{}'", type_name(item)));
        return container.as<std::shared_ptr<DictObj>>()->find(item) != nullptr;
    }
    if (container.is<std::shared_ptr<RangeObj>>()) {
        if (!is_intlike(item))
            return false;
        auto r = container.as<std::shared_ptr<RangeObj>>();
        std::int64_t x = as_int(item);
        if (r->step > 0 ? (x < r->start || x >= r->stop) : (x > r->start || x <= r->stop))
            return false;
        return (x - r->start) % r->step == 0;
    }
    bool found = false;
    if (container.is<std::shared_ptr<FileObj>>()) {
        for_each(container, [&](const Value& v) {
            found = equals(v, item);
            return !found;
        });
        return found;
    }
    raise("TypeError", fmt::format("argument of type '{}' is not iterable", type_name(container)));
}

bool Interp::compare(CmpKind op, const Value& a, const Value& b)
{
    switch (op) {
    case CmpKind::eq: return equals(a, b);
    case CmpKind::ne: return !equals(a, b);
    case CmpKind::lt: return less(a, b);
    case CmpKind::le: return less(a, b) || equals(a, b);
    case CmpKind::gt: return less(b, a);
    case CmpKind::ge: return less(b, a) || equals(a, b);
    case CmpKind::in: return contains(b, a);
    case CmpKind::not_in: return !contains(b, a);
    case CmpKind::is:
    case CmpKind::is_not: {
        bool same = a.v.index() == b.v.index() && equals(a, b) &&
                    (a.is_none() || a.is<bool>() || a.is<std::int64_t>() || a.is<double>() || a.is<std::string>() ||
                     std::visit(
                         [&](const auto& x) {
                             using T = std::decay_t<decltype(x)>;
                             if constexpr (std::is_same_v<T, std::shared_ptr<ListObj>> ||
                                           std::is_same_v<T, std::shared_ptr<TupleObj>> ||
                                           std::is_same_v<T, std::shared_ptr<DictObj>> ||
                                           std::is_same_v<T, std::shared_ptr<RangeObj>>)
                                 return x == std::get<T>(b.v);
                             else
                                 return true;
                         },
                         a.v));
        return op == CmpKind::is ? same : !same;
    }
    }
    return false;
}

Value Interp::subscript(const Value& obj, const Value& index)
{
    auto normalize = [&](std::int64_t i, std::size_t n, const char* what) {
        if (i < 0)
            i += static_cast<std::int64_t>(n);
        if (i < 0 || i >= static_cast<std::int64_t>(n))
            raise("IndexError", fmt::format("{} index out of range", what));
        return static_cast<std::size_t>(i);
    };
    if (obj.is<std::shared_ptr<ListObj>>()) {
        auto& items = obj.as<std::shared_ptr<ListObj>>()->items;
        return items[normalize(to_index(index), items.size(), "list")];
    }
    if (obj.is<std::shared_ptr<TupleObj>>()) {
        auto& items = obj.as<std::shared_ptr<TupleObj>>()->items;
        return items[normalize(to_index(index), items.size(), "tuple")];
    }
    if (obj.is<std::string>()) {
        auto& s = obj.as<std::string>();
        return Value(std::string(1, s[normalize(to_index(index), s.size(), "string")]));
    }
    if (obj.is<std::shared_ptr<DictObj>>()) {
        auto& d = *obj.as<std::shared_ptr<DictObj>>();
        if (d.is_set)
            raise("TypeError", "'set' object is not subscriptable");
        if (!hash_key(index))
            raise("TypeError", fmt::format("unhashable type: '{}'", type_name(index)));
        if (const Value* v = d.find(index))
            return *v;
        raise("KeyError", repr(index));
    }
    if (obj.is<std::shared_ptr<RangeObj>>()) {
        auto r = obj.as<std::shared_ptr<RangeObj>>();
        return Value(r->at(static_cast<std::int64_t>(
            normalize(to_index(index), static_cast<std::size_t>(r->size()), "range object"))));
    }
    if (obj.is<std::shared_ptr<MatchObj>>()) {
        auto m = obj.as<std::shared_ptr<MatchObj>>();
        auto g = m->groups.at(normalize(to_index(index), m->groups.size(), "group"));
        return g ? Value(*g) : none;
    }
    raise("TypeError", fmt::format("'{}' object is not subscriptable", type_name(obj)));
}

Value Interp::slice(const Value& obj, const Slice& s, Scope& scope)
{
    auto bound = [&](const ExprPtr& e) -> std::optional<std::int64_t> {
        if (!e)
            return std::nullopt;
        Value v = eval(*e, scope);
        if (v.is_none())
            return std::nullopt;
        return to_index(v);
    };
    auto lower = bound(s.lower);
    auto upper = bound(s.upper);
    std::int64_t step = bound(s.step).value_or(1);
    if (step == 0)
        raise("ValueError", "slice step cannot be zero");

    std::int64_t n = 0;
    if (obj.is<std::string>())
        n = static_cast<std::int64_t>(obj.as<std::string>().size());
    else if (auto* items = sequence_items(obj))
        n = static_cast<std::int64_t>(items->size());
    else if (obj.is<std::shared_ptr<RangeObj>>())
        n = obj.as<std::shared_ptr<RangeObj>>()->size();
    else
        raise("TypeError", fmt::format("'{}' object is not subscriptable", type_name(obj)));

    auto adjust = [&](std::optional<std::int64_t> v, std::int64_t dflt) {
        if (!v)
            return dflt;
        std::int64_t i = *v;
        if (i < 0) {
            i += n;
            if (i < 0)
                i = step < 0 ? -1 : 0;
        } else if (i >= n) {
            i = step < 0 ? n - 1 : n;
        }
        return i;
    };
    std::int64_t start = adjust(lower, step > 0 ? 0 : n - 1);
    std::int64_t stop = adjust(upper, step > 0 ? n : -1);
    std::vector<std::int64_t> idx;
    for (std::int64_t i = start; step > 0 ? i < stop : i > stop; i += step)
        idx.push_back(i);

    if (obj.is<std::string>()) {
        const auto& str_v = obj.as<std::string>();
        std::string out;
        for (auto i : idx)
            out += str_v[static_cast<std::size_t>(i)];
        return Value(std::move(out));
    }
    if (obj.is<std::shared_ptr<RangeObj>>()) {
        std::vector<Value> out;
        for (auto i : idx)
            out.emplace_back(obj.as<std::shared_ptr<RangeObj>>()->at(i));
        return make_list(std::move(out));
    }
    const auto& items = *sequence_items(obj);
    std::vector<Value> out;
    for (auto i : idx)
        out.push_back(items[static_cast<std::size_t>(i)]);
    return obj.is<std::shared_ptr<ListObj>>() ? make_list(std::move(out)) : make_tuple(std::move(out));
}

Value Interp::getattr(const Value& obj, const std::string& name)
{
    if (obj.is<std::shared_ptr<ModuleObj>>()) {
        auto m = obj.as<std::shared_ptr<ModuleObj>>();
        if (m->stub)
            raise("ModuleNotFoundError", fmt::format("No module named '{}'", m->name));
        if (auto it = m->attrs.find(name); it != m->attrs.end())
            return it->second;
        raise("AttributeError", fmt::format("module '{}' has no attribute '{}'", m->name, name));
    }
    if (obj.is<std::shared_ptr<FunctionObj>>()) {
        auto f = obj.as<std::shared_ptr<FunctionObj>>();
        if (name == "__name__")
            return Value(f->name);
        if (name == "__doc__")
            return f->def && f->def->docstring ? Value(f->docstring) : none;
    }
    if (obj.is<std::shared_ptr<BuiltinObj>>() && name == "__name__")
        return Value(obj.as<std::shared_ptr<BuiltinObj>>()->name);
    if (obj.is<std::shared_ptr<ExceptionObj>>() && name == "args")
        return make_tuple({Value(obj.as<std::shared_ptr<ExceptionObj>>()->message)});
    return get_method(*this, obj, name);
}

// ---------------------------------------------------------------------------
// Calls
// ---------------------------------------------------------------------------

Value Interp::call(const Value& fn, Args args, Kwargs kwargs)
{
    if (fn.is<std::shared_ptr<FunctionObj>>())
        return call_function(fn.as<std::shared_ptr<FunctionObj>>(), std::move(args), std::move(kwargs));
    if (fn.is<std::shared_ptr<BuiltinObj>>()) {
        auto b = fn.as<std::shared_ptr<BuiltinObj>>();
        return b->fn(*this, args, kwargs);
    }
    if (fn.is<std::shared_ptr<ModuleObj>>() && fn.as<std::shared_ptr<ModuleObj>>()->stub)
        raise("ModuleNotFoundError", fmt::format("No module named '{}'", fn.as<std::shared_ptr<ModuleObj>>()->name));
    raise("TypeError", fmt::format("'{}' object is not callable", type_name(fn)));
}

Value Interp::call_function(const std::shared_ptr<FunctionObj>& fn, Args args, Kwargs kwargs)
{
    if (stack_.size() >= max_call_depth)
        raise("RecursionError", "maximum recursion depth exceeded");
    const auto& params = fn->def ? fn->def->params : fn->lambda->params;
    auto scope = std::make_shared<Scope>();
    scope->parent = fn->closure;

    std::vector<bool> bound(params.size(), false);
    std::size_t next_arg = 0;
    std::size_t positional_count = 0;
    const Param* varargs = nullptr;
    const Param* varkw = nullptr;
    for (const auto& p : params) {
        if (p.kind == Param::Kind::varargs)
            varargs = &p;
        else if (p.kind == Param::Kind::kwargs)
            varkw = &p;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (p.kind != Param::Kind::normal)
            break;
        ++positional_count;
        if (next_arg < args.size()) {
            scope->vars[p.name] = std::move(args[next_arg++]);
            bound[i] = true;
        }
    }
    if (next_arg < args.size()) {
        if (!varargs)
            raise("TypeError", fmt::format("{}() takes {} positional argument{} but {} were given", fn->name,
                                           positional_count, positional_count == 1 ? "" : "s", args.size()));
        std::vector<Value> rest(std::make_move_iterator(args.begin() + static_cast<std::ptrdiff_t>(next_arg)),
                                std::make_move_iterator(args.end()));
        scope->vars[varargs->name] = make_tuple(std::move(rest));
    } else if (varargs) {
        scope->vars[varargs->name] = make_tuple();
    }
    Value extra = make_dict();
    for (auto& [name, value] : kwargs) {
        auto it = std::find_if(params.begin(), params.end(),
                               [&](const Param& p) { return p.kind == Param::Kind::normal && p.name == name; });
        if (it != params.end()) {
            auto i = static_cast<std::size_t>(it - params.begin());
            if (bound[i])
                raise("TypeError", fmt::format("{}() got multiple values for argument '{}'", fn->name, name));
            scope->vars[name] = std::move(value);
            bound[i] = true;
        } else if (varkw) {
            extra.as<std::shared_ptr<DictObj>>()->set(Value(name), std::move(value));
        } else {
            raise("TypeError", fmt::format("{}() got an unexpected keyword argument '{}'", fn->name, name));
        }
    }
    if (varkw)
        scope->vars[varkw->name] = extra;
    std::size_t default_index = 0;
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (p.kind != Param::Kind::normal)
            continue;
        bool has_default = p.default_value != nullptr;
        if (!bound[i]) {
            if (has_default)
                scope->vars[p.name] = fn->defaults[default_index];
            else
                missing.push_back("'" + p.name + "'");
        }
        if (has_default)
            ++default_index;
    }
    if (!missing.empty())
        raise("TypeError", fmt::format("{}() missing {} required positional argument{}: {}", fn->name,
                                       missing.size(), missing.size() == 1 ? "" : "s", fmt::join(missing, ", ")));

    const Module* module = fn->owner.get();
    stack_.push_back(TraceFrame{fn->name, fn->def ? fn->def->start_line : 0, module});
    FrameGuard guard{stack_};
    if (fn->lambda)
        return eval(*fn->lambda->body, *scope);
    Flow flow = exec_block(fn->def->body, *scope);
    if (flow == Flow::ret)
        return std::move(return_value_);
    return none;
}

std::vector<Value> Interp::eval_defaults(const std::vector<Param>& params, Scope& scope)
{
    std::vector<Value> defaults;
    for (const auto& p : params)
        if (p.default_value)
            defaults.push_back(eval(*p.default_value, scope));
    return defaults;
}

Value Interp::make_function(const FunctionDef& def, Scope& scope)
{
    auto fn = std::make_shared<FunctionObj>();
    fn->name = def.name;
    fn->def = &def;
    fn->owner = current_module_;
    fn->defaults = eval_defaults(def.params, scope);
    if (&scope != globals_.get())
        fn->closure = scope.shared_from_this();
    fn->docstring = def.docstring.value_or("");
    return Value(fn);
}

Value Interp::make_lambda(const LambdaExpr& lambda, Scope& scope)
{
    auto fn = std::make_shared<FunctionObj>();
    fn->name = "<lambda>";
    fn->lambda = &lambda;
    fn->owner = current_module_;
    fn->defaults = eval_defaults(lambda.params, scope);
    if (&scope != globals_.get())
        fn->closure = scope.shared_from_this();
    return Value(fn);
}

Value Interp::eval_call(const Call& c, Scope& scope)
{
    Value fn = eval(*c.func, scope);
    Args args;
    for (const auto& a : c.args) {
        if (auto* st = std::get_if<Starred>(&a->node)) {
            auto more = to_vector(eval(*st->value, scope));
            args.insert(args.end(), more.begin(), more.end());
        } else {
            args.push_back(eval(*a, scope));
        }
    }
    Kwargs kwargs;
    for (const auto& k : c.keywords) {
        Value v = eval(*k.value, scope);
        if (!k.name.empty()) {
            kwargs.emplace_back(k.name, std::move(v));
            continue;
        }
        if (!v.is<std::shared_ptr<DictObj>>())
            raise("TypeError", "argument after ** must be a mapping");
        for (auto& [key, val] : v.as<std::shared_ptr<DictObj>>()->entries) {
            if (!key.is<std::string>())
                raise("TypeError", "keywords must be strings");
            kwargs.emplace_back(key.as<std::string>(), val);
        }
    }
    return call(fn, std::move(args), std::move(kwargs));
}

Value Interp::eval_comprehension(const Comprehension& c, Scope& scope)
{
    auto inner = std::make_shared<Scope>();
    if (&scope != globals_.get())
        inner->parent = scope.shared_from_this();
    else
        inner->parent = nullptr;
    Value result = c.kind == Comprehension::Kind::dict  ? make_dict()
                   : c.kind == Comprehension::Kind::set ? make_set()
                                                        : make_list();

    std::function<void(std::size_t)> run = [&](std::size_t gi) {
        if (gi == c.generators.size()) {
            if (c.kind == Comprehension::Kind::dict) {
                Value k = eval(*c.key, *inner);
                if (!hash_key(k))
                    raise("TypeError", fmt::format("unhashable type: '{}'", type_name(k)));
                result.as<std::shared_ptr<DictObj>>()->set(k, eval(*c.elt, *inner));
            } else if (c.kind == Comprehension::Kind::set) {
                Value k = eval(*c.elt, *inner);
                if (!hash_key(k))
                    raise("TypeError", fmt::format("unhashable type: '{}'", type_name(k)));
                result.as<std::shared_ptr<DictObj>>()->set(k, none);
            } else {
                result.as<std::shared_ptr<ListObj>>()->items.push_back(eval(*c.elt, *inner));
            }
            return;
        }
        const auto& gen = c.generators[gi];
        Value iterable = eval(*gen.iter, gi == 0 ? scope : *inner);
        for_each(iterable, [&](const Value& item) {
            assign(*gen.target, item, *inner);
            for (const auto& cond : gen.ifs)
                if (!truthy(eval(*cond, *inner)))
                    return true;
            run(gi + 1);
            return true;
        });
    };
    run(0);
    return result;
}

Value Interp::eval_fstring(const FString& f, Scope& scope)
{
    std::string out;
    for (const auto& part : f.parts) {
        if (!part.expr) {
            out += part.literal;
            continue;
        }
        Value v = eval(*part.expr, scope);
        if (part.conversion == 'r' || part.conversion == 'a')
            v = Value(repr(v));
        else if (part.conversion == 's')
            v = Value(str(v));
        out += format_with_spec(*this, v, part.spec);
    }
    return Value(std::move(out));
}

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

Value Interp::eval(const Expr& e, Scope& scope)
{
    return std::visit(
        overloaded{
            [&](const Constant& c) -> Value { return c.value; },
            [&](const Name& n) -> Value { return lookup(n.id, scope); },
            [&](const FString& f) -> Value { return eval_fstring(f, scope); },
            [&](const ListExpr& l) -> Value {
                std::vector<Value> items;
                for (const auto& x : l.elts) {
                    if (auto* st = std::get_if<Starred>(&x->node)) {
                        auto more = to_vector(eval(*st->value, scope));
                        items.insert(items.end(), more.begin(), more.end());
                    } else {
                        items.push_back(eval(*x, scope));
                    }
                }
                return make_list(std::move(items));
            },
            [&](const TupleExpr& t) -> Value {
                std::vector<Value> items;
                for (const auto& x : t.elts) {
                    if (auto* st = std::get_if<Starred>(&x->node)) {
                        auto more = to_vector(eval(*st->value, scope));
                        items.insert(items.end(), more.begin(), more.end());
                    } else {
                        items.push_back(eval(*x, scope));
                    }
                }
                return make_tuple(std::move(items));
            },
            [&](const SetExpr& s) -> Value {
                Value out = make_set();
                for (const auto& x : s.elts) {
                    Value k = eval(*x, scope);
                    if (!hash_key(k))
                        raise("TypeError", fmt::format("unhashable type: '{}'", type_name(k)));
                    out.as<std::shared_ptr<DictObj>>()->set(k, none);
                }
                return out;
            },
            [&](const DictExpr& d) -> Value {
                Value out = make_dict();
                for (std::size_t i = 0; i < d.keys.size(); ++i) {
                    Value k = eval(*d.keys[i], scope);
                    if (!hash_key(k))
                        raise("TypeError", fmt::format("unhashable type: '{}'", type_name(k)));
                    out.as<std::shared_ptr<DictObj>>()->set(k, eval(*d.values[i], scope));
                }
                return out;
            },
            [&](const BinOp& b) -> Value {
                Value l = eval(*b.left, scope);
                Value r = eval(*b.right, scope);
                return binop(b.op, l, r);
            },
            [&](const UnaryOp& u) -> Value {
                Value v = eval(*u.operand, scope);
                switch (u.op) {
                case UnaryKind::not_: return Value(!truthy(v));
                case UnaryKind::neg:
                    if (is_intlike(v)) {
                        if (as_int(v) == INT64_MIN)
                            raise("OverflowError", "integer result exceeds the 64-bit range supported by this executor");
                        return Value(-as_int(v));
                    }
                    if (v.is<double>())
                        return Value(-v.as<double>());
                    break;
                case UnaryKind::pos:
                    if (is_intlike(v))
                        return Value(as_int(v));
                    if (v.is<double>())
                        return v;
                    break;
                case UnaryKind::invert:
                    if (is_intlike(v))
                        return Value(~as_int(v));
                    break;
                }
                raise("TypeError", fmt::format("bad operand type for unary operator: '{}'", type_name(v)));
            },
            [&](const BoolOp& b) -> Value {
                Value v;
                for (const auto& x : b.values) {
                    v = eval(*x, scope);
                    if (b.is_and != truthy(v))
                        return v;
                }
                return v;
            },
            [&](const Compare& c) -> Value {
                Value left = eval(*c.left, scope);
                for (std::size_t i = 0; i < c.ops.size(); ++i) {
                    Value right = eval(*c.comparators[i], scope);
                    if (!compare(c.ops[i], left, right))
                        return Value(false);
                    left = std::move(right);
                }
                return Value(true);
            },
            [&](const IfExp& i) -> Value {
                return truthy(eval(*i.test, scope)) ? eval(*i.body, scope) : eval(*i.orelse, scope);
            },
            [&](const Starred&) -> Value { raise("SyntaxError", "can't use starred expression here"); },
            [&](const Call& c) -> Value { return eval_call(c, scope); },
            [&](const Attribute& a) -> Value { return getattr(eval(*a.value, scope), a.attr); },
            [&](const Slice&) -> Value { raise("SyntaxError", "slice outside of a subscript"); },
            [&](const Subscript& s) -> Value {
                Value obj = eval(*s.value, scope);
                if (auto* sl = std::get_if<Slice>(&s.index->node))
                    return slice(obj, *sl, scope);
                return subscript(obj, eval(*s.index, scope));
            },
            [&](const LambdaExpr& l) -> Value { return make_lambda(l, scope); },
            [&](const Comprehension& c) -> Value { return eval_comprehension(c, scope); },
        },
        e.node);
}

// ---------------------------------------------------------------------------
// Assignment targets
// ---------------------------------------------------------------------------

void Interp::assign(const Expr& target, Value v, Scope& scope)
{
    if (auto* n = std::get_if<Name>(&target.node)) {
        store_name(n->id, std::move(v), scope);
        return;
    }
    if (auto* s = std::get_if<Subscript>(&target.node)) {
        Value obj = eval(*s->value, scope);
        if (auto* sl = std::get_if<Slice>(&s->index->node)) {
            if (!obj.is<std::shared_ptr<ListObj>>() || sl->step)
                raise("TypeError", "slice assignment is only supported on lists with unit step");
            auto& items = obj.as<std::shared_ptr<ListObj>>()->items;
            auto n = static_cast<std::int64_t>(items.size());
            auto bound = [&](const ExprPtr& e, std::int64_t dflt) {
                if (!e)
                    return dflt;
                Value b = eval(*e, scope);
                if (b.is_none())
                    return dflt;
                std::int64_t i = to_index(b);
                if (i < 0)
                    i = std::max<std::int64_t>(0, i + n);
                return std::min(i, n);
            };
            std::int64_t lo = bound(sl->lower, 0);
            std::int64_t hi = std::max(lo, bound(sl->upper, n));
            auto replacement = to_vector(v);
            items.erase(items.begin() + lo, items.begin() + hi);
            items.insert(items.begin() + lo, replacement.begin(), replacement.end());
            return;
        }
        Value index = eval(*s->index, scope);
        if (obj.is<std::shared_ptr<ListObj>>()) {
            auto& items = obj.as<std::shared_ptr<ListObj>>()->items;
            std::int64_t i = to_index(index);
            if (i < 0)
                i += static_cast<std::int64_t>(items.size());
            if (i < 0 || i >= static_cast<std::int64_t>(items.size()))
                raise("IndexError", "list assignment index out of range");
            items[static_cast<std::size_t>(i)] = std::move(v);
            return;
        }
        if (obj.is<std::shared_ptr<DictObj>>() && !obj.as<std::shared_ptr<DictObj>>()->is_set) {
            if (!hash_key(index))
                raise("TypeError", fmt::format("unhashable type: '{}'", type_name(index)));
            obj.as<std::shared_ptr<DictObj>>()->set(index, std::move(v));
            return;
        }
        raise("TypeError", fmt::format("'{}' object does not support item assignment", type_name(obj)));
    }
    if (std::holds_alternative<Attribute>(target.node)) {
        auto& a = std::get<Attribute>(target.node);
        Value obj = eval(*a.value, scope);
        raise("AttributeError", fmt::format("'{}' object attribute '{}' is read-only", type_name(obj), a.attr));
    }
    const std::vector<ExprPtr>* elts = nullptr;
    if (auto* t = std::get_if<TupleExpr>(&target.node))
        elts = &t->elts;
    else if (auto* l = std::get_if<ListExpr>(&target.node))
        elts = &l->elts;
    if (!elts)
        raise("SyntaxError", "cannot assign to expression");
    auto values = to_vector(v);
    std::size_t star = elts->size();
    for (std::size_t i = 0; i < elts->size(); ++i)
        if (std::holds_alternative<Starred>((*elts)[i]->node))
            star = i;
    if (star == elts->size()) {
        if (values.size() < elts->size())
            raise("ValueError", fmt::format("not enough values to unpack (expected {}, got {})", elts->size(),
                                            values.size()));
        if (values.size() > elts->size())
            raise("ValueError", fmt::format("too many values to unpack (expected {})", elts->size()));
        for (std::size_t i = 0; i < elts->size(); ++i)
            assign(*(*elts)[i], values[i], scope);
        return;
    }
    std::size_t fixed = elts->size() - 1;
    if (values.size() < fixed)
        raise("ValueError",
              fmt::format("not enough values to unpack (expected at least {}, got {})", fixed, values.size()));
    std::size_t after = elts->size() - star - 1;
    for (std::size_t i = 0; i < star; ++i)
        assign(*(*elts)[i], values[i], scope);
    std::vector<Value> middle(values.begin() + static_cast<std::ptrdiff_t>(star),
                              values.end() - static_cast<std::ptrdiff_t>(after));
    assign(*std::get<Starred>((*elts)[star]->node).value, make_list(std::move(middle)), scope);
    for (std::size_t i = 0; i < after; ++i)
        assign(*(*elts)[star + 1 + i], values[values.size() - after + i], scope);
}

void Interp::del(const Expr& target, Scope& scope)
{
    if (auto* n = std::get_if<Name>(&target.node)) {
        Scope& owner = (&scope != globals_.get() && scope.global_names.count(n->id)) ? *globals_ : scope;
        if (!owner.vars.erase(n->id))
            raise("NameError", fmt::format("name '{}' is not defined", n->id));
        return;
    }
    if (auto* s = std::get_if<Subscript>(&target.node)) {
        Value obj = eval(*s->value, scope);
        if (std::holds_alternative<Slice>(s->index->node))
            raise("TypeError", "slice deletion is not supported by this executor");
        Value index = eval(*s->index, scope);
        if (obj.is<std::shared_ptr<ListObj>>()) {
            auto& items = obj.as<std::shared_ptr<ListObj>>()->items;
            std::int64_t i = to_index(index);
            if (i < 0)
                i += static_cast<std::int64_t>(items.size());
            if (i < 0 || i >= static_cast<std::int64_t>(items.size()))
                raise("IndexError", "list assignment index out of range");
            items.erase(items.begin() + i);
            return;
        }
        if (obj.is<std::shared_ptr<DictObj>>()) {
            if (!obj.as<std::shared_ptr<DictObj>>()->erase(index))
                raise("KeyError", repr(index));
            return;
        }
        raise("TypeError", fmt::format("'{}' object does not support item deletion", type_name(obj)));
    }
    if (auto* t = std::get_if<TupleExpr>(&target.node)) {
        for (const auto& x : t->elts)
            del(*x, scope);
        return;
    }
    raise("SyntaxError", "cannot delete expression");
}

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

Flow Interp::exec_block(const Block& block, Scope& scope)
{
    for (const auto& st : block) {
        Flow f = exec_stmt(*st, scope);
        if (f != Flow::normal)
            return f;
    }
    return Flow::normal;
}

bool Interp::exception_matches(const std::string& raised, const Value& handler)
{
    if (handler.is<std::shared_ptr<BuiltinObj>>() && handler.as<std::shared_ptr<BuiltinObj>>()->is_exception_type)
        return is_exception_subclass(raised, handler.as<std::shared_ptr<BuiltinObj>>()->name);
    if (handler.is<std::shared_ptr<TupleObj>>()) {
        for (const auto& h : handler.as<std::shared_ptr<TupleObj>>()->items)
            if (exception_matches(raised, h))
                return true;
        return false;
    }
    raise("TypeError", "catching classes that do not inherit from BaseException is not allowed");
}

Flow Interp::exec_try(const Try& t, Scope& scope)
{
    bool finally_done = false;
    auto run_finally = [&]() -> Flow {
        finally_done = true;
        if (t.finalbody.empty())
            return Flow::normal;
        Value saved = return_value_;
        Flow f = exec_block(t.finalbody, scope);
        if (f == Flow::normal)
            return_value_ = std::move(saved);
        return f;
    };
    try {
        Flow flow = Flow::normal;
        bool raised = false;
        try {
            flow = exec_block(t.body, scope);
        } catch (const PyError& err) {
            raised = true;
            const ExceptHandler* chosen = nullptr;
            for (const auto& h : t.handlers) {
                if (!h.type || exception_matches(err.type, eval(*h.type, scope))) {
                    chosen = &h;
                    break;
                }
            }
            if (!chosen)
                throw;
            if (!chosen->name.empty()) {
                auto obj = std::make_shared<ExceptionObj>();
                obj->type = err.type;
                obj->message = err.message;
                store_name(chosen->name, Value(obj), scope);
            }
            handling_.push_back(err);
            struct Pop {
                std::vector<PyError>& v;
                ~Pop() { v.pop_back(); }
            } pop{handling_};
            flow = exec_block(chosen->body, scope);
        }
        if (!raised && flow == Flow::normal && !t.orelse.empty())
            flow = exec_block(t.orelse, scope);
        Flow fin = run_finally();
        return fin != Flow::normal ? fin : flow;
    } catch (const PyError&) {
        if (!finally_done) {
            Flow fin = run_finally();
            if (fin != Flow::normal)
                return fin;
        }
        throw;
    }
}

Flow Interp::exec_stmt(const Stmt& st, Scope& scope)
{
    check_deadline();
    if (!stack_.empty())
        stack_.back().line = st.line;
    return std::visit(
        overloaded{
            [&](const ExprStmt& s) {
                eval(*s.value, scope);
                return Flow::normal;
            },
            [&](const Assign& s) {
                Value v = eval(*s.value, scope);
                for (const auto& t : s.targets)
                    assign(*t, v, scope);
                return Flow::normal;
            },
            [&](const AugAssign& s) {
                if (auto* n = std::get_if<Name>(&s.target->node)) {
                    Value cur = lookup(n->id, scope);
                    Value rhs = eval(*s.value, scope);
                    if (s.op == BinOpKind::add && cur.is<std::shared_ptr<ListObj>>()) {
                        auto more = to_vector(rhs);
                        auto& items = cur.as<std::shared_ptr<ListObj>>()->items;
                        items.insert(items.end(), more.begin(), more.end());
                        store_name(n->id, cur, scope);
                    } else {
                        store_name(n->id, binop(s.op, cur, rhs), scope);
                    }
                    return Flow::normal;
                }
                if (auto* sub = std::get_if<Subscript>(&s.target->node)) {
                    if (std::holds_alternative<Slice>(sub->index->node))
                        raise("TypeError", "augmented slice assignment is not supported by this executor");
                    Value obj = eval(*sub->value, scope);
                    Value index = eval(*sub->index, scope);
                    Value cur = subscript(obj, index);
                    Value updated = binop(s.op, cur, eval(*s.value, scope));
                    if (obj.is<std::shared_ptr<ListObj>>()) {
                        auto& items = obj.as<std::shared_ptr<ListObj>>()->items;
                        std::int64_t i = to_index(index);
                        if (i < 0)
                            i += static_cast<std::int64_t>(items.size());
                        items[static_cast<std::size_t>(i)] = updated;
                    } else if (obj.is<std::shared_ptr<DictObj>>()) {
                        obj.as<std::shared_ptr<DictObj>>()->set(index, updated);
                    } else {
                        raise("TypeError",
                              fmt::format("'{}' object does not support item assignment", type_name(obj)));
                    }
                    return Flow::normal;
                }
                auto& a = std::get<Attribute>(s.target->node);
                raise("AttributeError", fmt::format("attribute '{}' is read-only", a.attr));
            },
            [&](const AnnAssign& s) {
                if (s.value)
                    assign(*s.target, eval(*s.value, scope), scope);
                return Flow::normal;
            },
            [&](const FunctionDef& def) {
                store_name(def.name, make_function(def, scope), scope);
                return Flow::normal;
            },
            [&](const Return& r) {
                return_value_ = r.value ? eval(*r.value, scope) : none;
                return Flow::ret;
            },
            [&](const If& s) {
                if (truthy(eval(*s.test, scope)))
                    return exec_block(s.body, scope);
                return exec_block(s.orelse, scope);
            },
            [&](const For& s) {
                Value iterable = eval(*s.iter, scope);
                Flow result = Flow::normal;
                bool broke = false;
                for_each(iterable, [&](const Value& item) {
                    assign(*s.target, item, scope);
                    Flow f = exec_block(s.body, scope);
                    if (f == Flow::brk) {
                        broke = true;
                        return false;
                    }
                    if (f == Flow::ret) {
                        result = Flow::ret;
                        return false;
                    }
                    return true;
                });
                if (result == Flow::ret)
                    return Flow::ret;
                if (!broke && !s.orelse.empty())
                    return exec_block(s.orelse, scope);
                return Flow::normal;
            },
            [&](const While& s) {
                while (truthy(eval(*s.test, scope))) {
                    check_deadline();
                    Flow f = exec_block(s.body, scope);
                    if (f == Flow::brk)
                        return Flow::normal;
                    if (f == Flow::ret)
                        return Flow::ret;
                }
                return exec_block(s.orelse, scope);
            },
            [&](const Break&) { return Flow::brk; },
            [&](const Continue&) { return Flow::cont; },
            [&](const Pass&) { return Flow::normal; },
            [&](const Import& s) {
                do_import(s, scope);
                return Flow::normal;
            },
            [&](const ImportFrom& s) {
                do_import_from(s, scope);
                return Flow::normal;
            },
            [&](const With& s) {
                std::vector<std::shared_ptr<FileObj>> opened;
                for (const auto& item : s.items) {
                    Value ctx = eval(*item.context, scope);
                    if (ctx.is<std::shared_ptr<ModuleObj>>() && ctx.as<std::shared_ptr<ModuleObj>>()->stub)
                        getattr(ctx, "__enter__");
                    if (ctx.is<std::shared_ptr<FileObj>>())
                        opened.push_back(ctx.as<std::shared_ptr<FileObj>>());
                    if (item.target)
                        assign(*item.target, ctx, scope);
                }
                struct Closer {
                    std::vector<std::shared_ptr<FileObj>>& files;
                    ~Closer()
                    {
                        for (auto& f : files)
                            f->closed = true;
                    }
                } closer{opened};
                return exec_block(s.body, scope);
            },
            [&](const Try& s) { return exec_try(s, scope); },
            [&](const Raise& s) -> Flow {
                if (!s.exc) {
                    if (handling_.empty())
                        raise("RuntimeError", "No active exception to reraise");
                    throw handling_.back();
                }
                Value v = eval(*s.exc, scope);
                if (v.is<std::shared_ptr<ExceptionObj>>()) {
                    auto e = v.as<std::shared_ptr<ExceptionObj>>();
                    raise(e->type, e->message);
                }
                if (v.is<std::shared_ptr<BuiltinObj>>() && v.as<std::shared_ptr<BuiltinObj>>()->is_exception_type)
                    raise(v.as<std::shared_ptr<BuiltinObj>>()->name, "");
                raise("TypeError", "exceptions must derive from BaseException");
            },
            [&](const Assert& s) {
                if (!truthy(eval(*s.test, scope)))
                    raise("AssertionError", s.msg ? str(eval(*s.msg, scope)) : std::string{});
                return Flow::normal;
            },
            [&](const Global& s) {
                if (&scope != globals_.get())
                    scope.global_names.insert(s.names.begin(), s.names.end());
                return Flow::normal;
            },
            [&](const Delete& s) {
                for (const auto& t : s.targets)
                    del(*t, scope);
                return Flow::normal;
            },
        },
        st.node);
}

// ---------------------------------------------------------------------------
// Imports
// ---------------------------------------------------------------------------

Value Interp::import_module(const std::string& dotted)
{
    if (auto it = module_cache_.find(dotted); it != module_cache_.end())
        return it->second;
    Value mod;
    if (auto m = make_module(*this, dotted)) {
        mod = *m;
    } else {
        auto stub = std::make_shared<ModuleObj>();
        stub->name = dotted;
        stub->stub = true;
        mod = Value(stub);
    }
    module_cache_[dotted] = mod;
    return mod;
}

void Interp::do_import(const Import& imp, Scope& scope)
{
    for (const auto& alias : imp.names) {
        Value full = import_module(alias.name);
        if (!alias.asname.empty()) {
            store_name(alias.asname, full, scope);
            continue;
        }
        std::string top = alias.name.substr(0, alias.name.find('.'));
        store_name(top, import_module(top), scope);
    }
}

void Interp::do_import_from(const ImportFrom& imp, Scope& scope)
{
    Value mod = import_module(imp.module);
    auto m = mod.as<std::shared_ptr<ModuleObj>>();
    for (const auto& alias : imp.names) {
        if (alias.name == "*") {
            if (!m->stub)
                for (auto& [k, v] : m->attrs)
                    store_name(k, v, scope);
            continue;
        }
        const std::string& bind = alias.asname.empty() ? alias.name : alias.asname;
        if (m->stub) {
            store_name(bind, mod, scope);
            continue;
        }
        if (auto it = m->attrs.find(alias.name); it != m->attrs.end()) {
            store_name(bind, it->second, scope);
            continue;
        }
        Value sub = import_module(imp.module + "." + alias.name);
        if (sub.as<std::shared_ptr<ModuleObj>>()->stub)
            raise("ImportError", fmt::format("cannot import name '{}' from '{}'", alias.name, imp.module));
        store_name(bind, sub, scope);
    }
}

// ---------------------------------------------------------------------------
// Public facade
// ---------------------------------------------------------------------------

struct Interpreter::Impl {
    Interp interp;
    explicit Impl(Hooks h) : interp(std::move(h)) {}
};

Interpreter::Interpreter(Hooks hooks) : impl_(std::make_unique<Impl>(std::move(hooks))) {}

Interpreter::~Interpreter() = default;

Outcome Interpreter::exec(std::string_view code, Deadline deadline, bool display_result)
{
    return impl_->interp.run(code, deadline, display_result);
}

void Interpreter::reset()
{
    impl_->interp.reset();
}

bool Interpreter::has_name(const std::string& name) const
{
    try {
        return !impl_->interp.run(name, std::nullopt, false).error.has_value();
    } catch (...) {
        return false;
    }
}

}  // namespace dynact::minipy
