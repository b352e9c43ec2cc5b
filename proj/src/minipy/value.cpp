#include "value.hpp"

#include "ast.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

namespace dynact::minipy {

std::int64_t RangeObj::size() const
{
    if (step > 0)
        return stop > start ? (stop - start + step - 1) / step : 0;
    return start > stop ? (start - stop - step - 1) / (-step) : 0;
}

const Value* DictObj::find(const Value& key) const
{
    auto k = hash_key(key);
    if (!k)
        return nullptr;
    auto it = index.find(*k);
    return it == index.end() ? nullptr : &entries[it->second].second;
}

Value* DictObj::find(const Value& key)
{
    return const_cast<Value*>(std::as_const(*this).find(key));
}

void DictObj::set(const Value& key, Value value)
{
    auto k = hash_key(key);
    auto it = index.find(*k);
    if (it != index.end()) {
        entries[it->second].second = std::move(value);
        return;
    }
    index.emplace(*k, entries.size());
    entries.emplace_back(key, std::move(value));
}

bool DictObj::erase(const Value& key)
{
    auto k = hash_key(key);
    if (!k)
        return false;
    auto it = index.find(*k);
    if (it == index.end())
        return false;
    std::size_t pos = it->second;
    entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(pos));
    index.erase(it);
    for (auto& [name, i] : index)
        if (i > pos)
            --i;
    return true;
}

Value make_list(std::vector<Value> items)
{
    auto l = std::make_shared<ListObj>();
    l->items = std::move(items);
    return Value(l);
}

Value make_tuple(std::vector<Value> items)
{
    auto t = std::make_shared<TupleObj>();
    t->items = std::move(items);
    return Value(t);
}

Value make_dict()
{
    return Value(std::make_shared<DictObj>());
}

Value make_set()
{
    auto d = std::make_shared<DictObj>();
    d->is_set = true;
    return Value(d);
}

Value make_builtin(std::string name, NativeFn fn)
{
    auto b = std::make_shared<BuiltinObj>();
    b->name = std::move(name);
    b->fn = std::move(fn);
    return Value(b);
}

std::string type_name(const Value& v)
{
    return std::visit(overloaded{[](const NoneType&) -> std::string { return "NoneType"; },
                                 [](bool) -> std::string { return "bool"; },
                                 [](std::int64_t) -> std::string { return "int"; },
                                 [](double) -> std::string { return "float"; },
                                 [](const std::string&) -> std::string { return "str"; },
                                 [](const std::shared_ptr<ListObj>&) -> std::string { return "list"; },
                                 [](const std::shared_ptr<TupleObj>&) -> std::string { return "tuple"; },
                                 [](const std::shared_ptr<DictObj>& d) -> std::string {
                                     return d->is_set ? "set" : "dict";
                                 },
                                 [](const std::shared_ptr<FunctionObj>&) -> std::string { return "function"; },
                                 [](const std::shared_ptr<BuiltinObj>& b) -> std::string {
                                     return b->is_exception_type || b->is_type ? "type"
                                                                               : "builtin_function_or_method";
                                 },
                                 [](const std::shared_ptr<ModuleObj>&) -> std::string { return "module"; },
                                 [](const std::shared_ptr<FileObj>&) -> std::string { return "TextIOWrapper"; },
                                 [](const std::shared_ptr<RangeObj>&) -> std::string { return "range"; },
                                 [](const std::shared_ptr<ExceptionObj>& e) -> std::string { return e->type; },
                                 [](const std::shared_ptr<MatchObj>&) -> std::string { return "re.Match"; }},
                      v.v);
}

std::string format_float(double d)
{
    if (std::isnan(d))
        return "nan";
    if (std::isinf(d))
        return d > 0 ? "inf" : "-inf";
    if (d == 0.0)
        return std::signbit(d) ? "-0.0" : "0.0";
    // Shortest round-trip digits, then laid out the way Python's repr does.
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::scientific);
    std::string sci(buf, end);
    bool negative = sci.front() == '-';
    if (negative)
        sci.erase(0, 1);
    auto epos = sci.find('e');
    int exponent = std::stoi(sci.substr(epos + 1));
    std::string digits;
    for (char c : sci.substr(0, epos))
        if (c != '.')
            digits += c;
    std::string out;
    if (exponent >= -4 && exponent < 16) {
        int point = exponent + 1;  // digits before the decimal point
        if (point <= 0) {
            out = "0." + std::string(static_cast<std::size_t>(-point), '0') + digits;
        } else if (point >= static_cast<int>(digits.size())) {
            out = digits + std::string(static_cast<std::size_t>(point) - digits.size(), '0') + ".0";
        } else {
            out = digits.substr(0, static_cast<std::size_t>(point)) + "." + digits.substr(static_cast<std::size_t>(point));
        }
    }
    if (out.empty()) {
        out = digits.substr(0, 1);
        if (digits.size() > 1)
            out += "." + digits.substr(1);
        out += fmt::format("e{}{:02d}", exponent < 0 ? '-' : '+', std::abs(exponent));
    }
    return negative ? "-" + out : out;
}

namespace {

std::string repr_string(const std::string& s)
{
    bool has_single = s.find('\'') != std::string::npos;
    bool has_double = s.find('"') != std::string::npos;
    char q = has_single && !has_double ? '"' : '\'';
    std::string out(1, q);
    for (unsigned char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c == static_cast<unsigned char>(q))
                out += fmt::format("\\{}", q);
            else if (c < 0x20 || c == 0x7f)
                out += fmt::format("\\x{:02x}", c);
            else
                out += static_cast<char>(c);
        }
    }
    out += q;
    return out;
}

std::string join_repr(const std::vector<Value>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i)
            out += ", ";
        out += repr(items[i]);
    }
    return out;
}

}  // namespace

std::string repr(const Value& v)
{
    return std::visit(
        overloaded{[](const NoneType&) -> std::string { return "None"; },
                   [](bool b) -> std::string { return b ? "True" : "False"; },
                   [](std::int64_t i) -> std::string { return std::to_string(i); },
                   [](double d) -> std::string { return format_float(d); },
                   [](const std::string& s) -> std::string { return repr_string(s); },
                   [](const std::shared_ptr<ListObj>& l) -> std::string { return "[" + join_repr(l->items) + "]"; },
                   [](const std::shared_ptr<TupleObj>& t) -> std::string {
                       if (t->items.size() == 1)
                           return "(" + repr(t->items[0]) + ",)";
                       return "(" + join_repr(t->items) + ")";
                   },
                   [](const std::shared_ptr<DictObj>& d) -> std::string {
                       if (d->is_set) {
                           if (d->entries.empty())
                               return "set()";
                           std::string out = "{";
                           for (std::size_t i = 0; i < d->entries.size(); ++i)
                               out += (i ? ", " : "") + repr(d->entries[i].first);
                           return out + "}";
                       }
                       std::string out = "{";
                       for (std::size_t i = 0; i < d->entries.size(); ++i)
                           out += (i ? ", " : "") + repr(d->entries[i].first) + ": " + repr(d->entries[i].second);
                       return out + "}";
                   },
                   [](const std::shared_ptr<FunctionObj>& f) -> std::string {
                       return fmt::format("<function {}>", f->name);
                   },
                   [](const std::shared_ptr<BuiltinObj>& b) -> std::string {
                       if (b->is_exception_type || b->is_type)
                           return fmt::format("<class '{}'>", b->name);
                       return fmt::format("<built-in function {}>", b->name);
                   },
                   [](const std::shared_ptr<ModuleObj>& m) -> std::string {
                       return fmt::format("<module '{}'>", m->name);
                   },
                   [](const std::shared_ptr<FileObj>& f) -> std::string {
                       return fmt::format("<_io.TextIOWrapper name='{}' mode='{}'>", f->path, f->mode);
                   },
                   [](const std::shared_ptr<RangeObj>& r) -> std::string {
                       if (r->step == 1)
                           return fmt::format("range({}, {})", r->start, r->stop);
                       return fmt::format("range({}, {}, {})", r->start, r->stop, r->step);
                   },
                   [](const std::shared_ptr<ExceptionObj>& e) -> std::string {
                       return fmt::format("{}({})", e->type, repr_string(e->message));
                   },
                   [](const std::shared_ptr<MatchObj>& m) -> std::string {
                       return fmt::format("<re.Match object; span=({}, {}), match={}>", m->start, m->end,
                                          repr_string(m->groups[0].value_or("")));
                   }},
        v.v);
}

std::string str(const Value& v)
{
    if (v.is<std::string>())
        return v.as<std::string>();
    if (v.is<std::shared_ptr<ExceptionObj>>())
        return v.as<std::shared_ptr<ExceptionObj>>()->message;
    return repr(v);
}

bool truthy(const Value& v)
{
    return std::visit(overloaded{[](const NoneType&) { return false; },
                                 [](bool b) { return b; },
                                 [](std::int64_t i) { return i != 0; },
                                 [](double d) { return d != 0.0; },
                                 [](const std::string& s) { return !s.empty(); },
                                 [](const std::shared_ptr<ListObj>& l) { return !l->items.empty(); },
                                 [](const std::shared_ptr<TupleObj>& t) { return !t->items.empty(); },
                                 [](const std::shared_ptr<DictObj>& d) { return !d->entries.empty(); },
                                 [](const std::shared_ptr<RangeObj>& r) { return r->size() > 0; },
                                 [](const auto&) { return true; }},
                      v.v);
}

namespace {

std::optional<double> as_double(const Value& v)
{
    if (v.is<bool>())
        return v.as<bool>() ? 1.0 : 0.0;
    if (v.is<std::int64_t>())
        return static_cast<double>(v.as<std::int64_t>());
    if (v.is<double>())
        return v.as<double>();
    return std::nullopt;
}

bool seq_equal(const std::vector<Value>& a, const std::vector<Value>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!equals(a[i], b[i]))
            return false;
    return true;
}

}  // namespace

bool equals(const Value& a, const Value& b)
{
    if (a.is_number() && b.is_number()) {
        if (!a.is<double>() && !b.is<double>()) {
            auto ai = a.is<bool>() ? std::int64_t{a.as<bool>()} : a.as<std::int64_t>();
            auto bi = b.is<bool>() ? std::int64_t{b.as<bool>()} : b.as<std::int64_t>();
            return ai == bi;
        }
        return *as_double(a) == *as_double(b);
    }
    if (a.v.index() != b.v.index())
        return false;
    return std::visit(overloaded{[](const NoneType&, const NoneType&) { return true; },
                                 [](const std::string& x, const std::string& y) { return x == y; },
                                 [](const std::shared_ptr<ListObj>& x, const std::shared_ptr<ListObj>& y) {
                                     return x == y || seq_equal(x->items, y->items);
                                 },
                                 [](const std::shared_ptr<TupleObj>& x, const std::shared_ptr<TupleObj>& y) {
                                     return x == y || seq_equal(x->items, y->items);
                                 },
                                 [](const std::shared_ptr<DictObj>& x, const std::shared_ptr<DictObj>& y) {
                                     if (x == y)
                                         return true;
                                     if (x->is_set != y->is_set || x->entries.size() != y->entries.size())
                                         return false;
                                     for (auto& [k, val] : x->entries) {
                                         const Value* other = y->find(k);
                                         if (!other || !equals(val, *other))
                                             return false;
                                     }
                                     return true;
                                 },
                                 [](const std::shared_ptr<RangeObj>& x, const std::shared_ptr<RangeObj>& y) {
                                     return x->start == y->start && x->stop == y->stop && x->step == y->step;
                                 },
                                 [](const auto& x, const auto& y) {
                                     if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::decay_t<decltype(y)>>)
                                         return x == y;
                                     else
                                         return false;
                                 }},
                      a.v, b.v);
}

std::optional<std::string> hash_key(const Value& v)
{
    if (v.is_number()) {
        double d = *as_double(v);
        if (v.is<double>() && (d != std::floor(d) || std::abs(d) > 9.0e18))
            return "f:" + format_float(d);
        std::int64_t i = v.is<double>() ? static_cast<std::int64_t>(d)
                         : v.is<bool>() ? std::int64_t{v.as<bool>()}
                                        : v.as<std::int64_t>();
        return "n:" + std::to_string(i);
    }
    if (v.is<std::string>())
        return "s:" + v.as<std::string>();
    if (v.is_none())
        return std::string("N");
    if (v.is<std::shared_ptr<TupleObj>>()) {
        std::string out = "t(";
        for (auto& item : v.as<std::shared_ptr<TupleObj>>()->items) {
            auto k = hash_key(item);
            if (!k)
                return std::nullopt;
            out += std::to_string(k->size()) + ":" + *k;
        }
        return out + ")";
    }
    if (v.is<std::shared_ptr<FunctionObj>>())
        return fmt::format("p:{}", static_cast<const void*>(v.as<std::shared_ptr<FunctionObj>>().get()));
    if (v.is<std::shared_ptr<BuiltinObj>>())
        return fmt::format("p:{}", static_cast<const void*>(v.as<std::shared_ptr<BuiltinObj>>().get()));
    if (v.is<std::shared_ptr<ModuleObj>>())
        return fmt::format("p:{}", static_cast<const void*>(v.as<std::shared_ptr<ModuleObj>>().get()));
    return std::nullopt;
}

}  // namespace dynact::minipy
