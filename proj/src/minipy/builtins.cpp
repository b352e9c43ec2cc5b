#include "native.hpp"

#include <algorithm>
#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace dynact::minipy {

// ---------------------------------------------------------------------------
// Argument helpers
// ---------------------------------------------------------------------------

std::optional<Value> ArgReader::opt(std::size_t pos, std::string_view name) const
{
    std::optional<Value> found;
    if (pos < args_.size())
        found = args_[pos];
    for (auto& [k, v] : kwargs_) {
        if (k != name)
            continue;
        if (found)
            in_.raise("TypeError", fmt::format("{}() got multiple values for argument '{}'", fname_, name));
        found = v;
    }
    return found;
}

Value ArgReader::get(std::size_t pos, std::string_view name) const
{
    auto v = opt(pos, name);
    if (!v)
        in_.raise("TypeError", fmt::format("{}() missing required argument '{}' (pos {})", fname_, name, pos + 1));
    return *v;
}

void ArgReader::at_most(std::size_t n) const
{
    if (args_.size() > n)
        in_.raise("TypeError", fmt::format("{}() takes at most {} positional argument{} ({} given)", fname_, n,
                                           n == 1 ? "" : "s", args_.size()));
}

std::string expect_str(Interp& in, const Value& v, std::string_view context)
{
    if (!v.is<std::string>())
        in.raise("TypeError", fmt::format("{} must be str, not {}", context, type_name(v)));
    return v.as<std::string>();
}

std::int64_t expect_int(Interp& in, const Value& v, std::string_view context)
{
    if (v.is<bool>())
        return v.as<bool>();
    if (!v.is<std::int64_t>())
        in.raise("TypeError", fmt::format("{} must be an integer, not {}", context, type_name(v)));
    return v.as<std::int64_t>();
}

double expect_float(Interp& in, const Value& v, std::string_view context)
{
    if (v.is<double>())
        return v.as<double>();
    if (v.is<std::int64_t>())
        return static_cast<double>(v.as<std::int64_t>());
    if (v.is<bool>())
        return v.as<bool>() ? 1.0 : 0.0;
    in.raise("TypeError", fmt::format("{} must be a real number, not {}", context, type_name(v)));
}

std::int64_t length_of(Interp& in, const Value& v)
{
    if (v.is<std::string>())
        return static_cast<std::int64_t>(v.as<std::string>().size());
    if (v.is<std::shared_ptr<ListObj>>())
        return static_cast<std::int64_t>(v.as<std::shared_ptr<ListObj>>()->items.size());
    if (v.is<std::shared_ptr<TupleObj>>())
        return static_cast<std::int64_t>(v.as<std::shared_ptr<TupleObj>>()->items.size());
    if (v.is<std::shared_ptr<DictObj>>())
        return static_cast<std::int64_t>(v.as<std::shared_ptr<DictObj>>()->entries.size());
    if (v.is<std::shared_ptr<RangeObj>>())
        return v.as<std::shared_ptr<RangeObj>>()->size();
    in.raise("TypeError", fmt::format("object of type '{}' has no len()", type_name(v)));
}

namespace {

// ---------------------------------------------------------------------------
// Exceptions
// ---------------------------------------------------------------------------

const std::map<std::string, std::string>& exception_parents()
{
    static const std::map<std::string, std::string> parents = {
        {"BaseException", ""},
        {"Exception", "BaseException"},
        {"ArithmeticError", "Exception"},
        {"ZeroDivisionError", "ArithmeticError"},
        {"OverflowError", "ArithmeticError"},
        {"LookupError", "Exception"},
        {"KeyError", "LookupError"},
        {"IndexError", "LookupError"},
        {"ValueError", "Exception"},
        {"UnicodeDecodeError", "ValueError"},
        {"JSONDecodeError", "ValueError"},
        {"StatisticsError", "ValueError"},
        {"TypeError", "Exception"},
        {"NameError", "Exception"},
        {"AttributeError", "Exception"},
        {"RuntimeError", "Exception"},
        {"RecursionError", "RuntimeError"},
        {"NotImplementedError", "RuntimeError"},
        {"OSError", "Exception"},
        {"FileNotFoundError", "OSError"},
        {"URLError", "OSError"},
        {"HTTPError", "URLError"},
        {"FileExistsError", "OSError"},
        {"PermissionError", "OSError"},
        {"IsADirectoryError", "OSError"},
        {"NotADirectoryError", "OSError"},
        {"TimeoutError", "OSError"},
        {"ImportError", "Exception"},
        {"ModuleNotFoundError", "ImportError"},
        {"AssertionError", "Exception"},
        {"StopIteration", "Exception"},
        {"MemoryError", "Exception"},
        {"SyntaxError", "Exception"},
        {"error", "Exception"},
    };
    return parents;
}

Value make_exception_type(const std::string& name)
{
    auto b = std::make_shared<BuiltinObj>();
    b->name = name;
    b->is_exception_type = true;
    b->fn = [name](Interp&, Args& args, Kwargs&) -> Value {
        auto e = std::make_shared<ExceptionObj>();
        e->type = name;
        if (args.size() == 1)
            e->message = str(args[0]);
        else if (args.size() > 1)
            e->message = repr(make_tuple(args));
        return Value(e);
    };
    return Value(b);
}

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

std::string strip_chars(const std::string& s, const std::string& chars, bool left, bool right)
{
    std::size_t b = 0, e = s.size();
    if (left)
        while (b < e && chars.find(s[b]) != std::string::npos)
            ++b;
    if (right)
        while (e > b && chars.find(s[e - 1]) != std::string::npos)
            --e;
    return s.substr(b, e - b);
}

const std::string whitespace = " \t\n\r\v\f";

Value int_from_string(Interp& in, const std::string& text, int base)
{
    std::string s = strip_chars(text, whitespace, true, true);
    std::string digits;
    for (char c : s)
        if (c != '_')
            digits += c;
    std::size_t i = 0;
    bool negative = false;
    if (i < digits.size() && (digits[i] == '+' || digits[i] == '-'))
        negative = digits[i++] == '-';
    if (base == 0 || base == 16 || base == 8 || base == 2) {
        if (digits.size() > i + 1 && digits[i] == '0') {
            char p = static_cast<char>(std::tolower(static_cast<unsigned char>(digits[i + 1])));
            int prefixed = p == 'x' ? 16 : p == 'o' ? 8 : p == 'b' ? 2 : 0;
            if (prefixed && (base == 0 || base == prefixed)) {
                base = prefixed;
                i += 2;
            }
        }
        if (base == 0)
            base = 10;
    }
    auto invalid = [&]() -> Value {
        in.raise("ValueError", fmt::format("invalid literal for int() with base {}: {}", base, repr(Value(text))));
    };
    if (i >= digits.size())
        return invalid();
    std::int64_t value = 0;
    for (; i < digits.size(); ++i) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(digits[i])));
        int d = std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : (c >= 'a' && c <= 'z') ? c - 'a' + 10 : 99;
        if (d >= base)
            return invalid();
        if (__builtin_mul_overflow(value, base, &value) || __builtin_add_overflow(value, d, &value))
            in.raise("OverflowError", "integer result exceeds the 64-bit range supported by this executor");
    }
    return Value(negative ? -value : value);
}

std::int64_t float_to_int(Interp& in, double d)
{
    if (std::isnan(d))
        in.raise("ValueError", "cannot convert float NaN to integer");
    if (std::isinf(d))
        in.raise("OverflowError", "cannot convert float infinity to integer");
    double t = std::trunc(d);
    if (t >= 9.2233720368547758e18 || t < -9.2233720368547758e18)
        in.raise("OverflowError", "integer result exceeds the 64-bit range supported by this executor");
    return static_cast<std::int64_t>(t);
}

std::optional<double> parse_float(const std::string& text)
{
    std::string s = strip_chars(text, whitespace, true, true);
    std::string lower;
    for (char c : s)
        if (c != '_')
            lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::string body = lower;
    bool negative = false;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
        negative = body[0] == '-';
        body.erase(0, 1);
    }
    if (body == "inf" || body == "infinity")
        return negative ? -HUGE_VAL : HUGE_VAL;
    if (body == "nan")
        return std::nan("");
    if (body.empty() || body.find_first_of("0123456789") == std::string::npos ||
        body.find_first_not_of("0123456789.e+-") != std::string::npos)
        return std::nullopt;
    char* end = nullptr;
    errno = 0;
    double d = std::strtod(lower.c_str(), &end);
    if (end != lower.c_str() + lower.size())
        return std::nullopt;
    return d;
}

Value to_float(Interp& in, const Value& v)
{
    if (v.is<std::string>()) {
        auto d = parse_float(v.as<std::string>());
        if (!d)
            in.raise("ValueError", fmt::format("could not convert string to float: {}", repr(v)));
        return Value(*d);
    }
    return Value(expect_float(in, v, "float() argument"));
}

Value to_int(Interp& in, const Value& v, std::optional<Value> base)
{
    if (base) {
        return int_from_string(in, expect_str(in, v, "int() argument with explicit base"),
                               static_cast<int>(expect_int(in, *base, "base")));
    }
    if (v.is<std::string>())
        return int_from_string(in, v.as<std::string>(), 10);
    if (v.is<double>())
        return Value(float_to_int(in, v.as<double>()));
    if (v.is<bool>())
        return Value(std::int64_t{v.as<bool>()});
    if (v.is<std::int64_t>())
        return v;
    in.raise("TypeError", fmt::format("int() argument must be a string or a number, not '{}'", type_name(v)));
}

// ---------------------------------------------------------------------------
// Format specifications
// ---------------------------------------------------------------------------

struct Spec {
    char fill = ' ';
    char align = 0;
    char sign = '-';
    bool alternate = false;
    bool zero = false;
    int width = -1;
    char grouping = 0;
    int precision = -1;
    char type = 0;
};

Spec parse_spec(Interp& in, std::string_view s)
{
    Spec spec;
    std::size_t i = 0;
    auto is_align = [](char c) { return c == '<' || c == '>' || c == '^' || c == '='; };
    if (s.size() >= 2 && is_align(s[1])) {
        spec.fill = s[0];
        spec.align = s[1];
        i = 2;
    } else if (!s.empty() && is_align(s[0])) {
        spec.align = s[0];
        i = 1;
    }
    if (i < s.size() && (s[i] == '+' || s[i] == '-' || s[i] == ' '))
        spec.sign = s[i++];
    if (i < s.size() && s[i] == '#') {
        spec.alternate = true;
        ++i;
    }
    if (i < s.size() && s[i] == '0') {
        spec.zero = true;
        ++i;
    }
    std::size_t start = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
        ++i;
    if (i > start)
        spec.width = std::stoi(std::string(s.substr(start, i - start)));
    if (i < s.size() && (s[i] == ',' || s[i] == '_'))
        spec.grouping = s[i++];
    if (i < s.size() && s[i] == '.') {
        ++i;
        start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
            ++i;
        if (i == start)
            in.raise("ValueError", "Format specifier missing precision");
        spec.precision = std::stoi(std::string(s.substr(start, i - start)));
    }
    if (i < s.size())
        spec.type = s[i++];
    if (i != s.size())
        in.raise("ValueError", fmt::format("Invalid format specifier '{}'", s));
    return spec;
}

std::string group_digits(const std::string& digits, char sep)
{
    std::string out;
    int count = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (count && count % 3 == 0)
            out += sep;
        out += *it;
        ++count;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::string pad(const std::string& body, const Spec& spec, char default_align, std::size_t sign_len = 0)
{
    if (spec.width < 0 || body.size() >= static_cast<std::size_t>(spec.width))
        return body;
    std::size_t n = static_cast<std::size_t>(spec.width) - body.size();
    char align = spec.align ? spec.align : default_align;
    char fill = spec.fill;
    if (!spec.align && spec.zero) {
        align = '=';
        fill = '0';
    }
    switch (align) {
    case '<': return body + std::string(n, fill);
    case '^': return std::string(n / 2, fill) + body + std::string(n - n / 2, fill);
    case '=': return body.substr(0, sign_len) + std::string(n, fill) + body.substr(sign_len);
    default: return std::string(n, fill) + body;
    }
}

std::string format_number(Interp& in, const Value& v, const Spec& spec)
{
    char type = spec.type;
    bool is_int = !v.is<double>();
    if (type == 'c') {
        std::int64_t code = expect_int(in, v, "%c");
        return pad(std::string(1, static_cast<char>(code)), spec, '>');
    }
    if (is_int && (type == 0 || type == 'd' || type == 'n' || type == 'x' || type == 'X' || type == 'o' ||
                   type == 'b')) {
        std::int64_t i = v.is<bool>() ? std::int64_t{v.as<bool>()} : v.as<std::int64_t>();
        std::uint64_t mag = i < 0 ? 0 - static_cast<std::uint64_t>(i) : static_cast<std::uint64_t>(i);
        std::string digits;
        std::string prefix;
        switch (type) {
        case 'x': digits = fmt::format("{:x}", mag); prefix = "0x"; break;
        case 'X': digits = fmt::format("{:X}", mag); prefix = "0X"; break;
        case 'o': digits = fmt::format("{:o}", mag); prefix = "0o"; break;
        case 'b': digits = fmt::format("{:b}", mag); prefix = "0b"; break;
        default: digits = std::to_string(mag); break;
        }
        if (spec.grouping)
            digits = group_digits(digits, spec.grouping);
        std::string sign = i < 0 ? "-" : spec.sign == '+' ? "+" : spec.sign == ' ' ? " " : "";
        std::string lead = sign + (spec.alternate ? prefix : "");
        return pad(lead + digits, spec, '>', lead.size());
    }
    if (!is_int && (type == 'd' || type == 'x' || type == 'X' || type == 'o' || type == 'b'))
        in.raise("ValueError", fmt::format("Unknown format code '{}' for object of type 'float'", type));

    double d = expect_float(in, v, "format");
    bool negative = std::signbit(d) && !std::isnan(d);
    double mag = std::fabs(d);
    std::string body;
    int prec = spec.precision;
    switch (type) {
    case 'f':
    case 'F': body = fmt::format("{:.{}f}", mag, prec < 0 ? 6 : prec); break;
    case 'e':
    case 'E': body = fmt::format("{:.{}e}", mag, prec < 0 ? 6 : prec); break;
    case 'g':
    case 'G': body = fmt::format("{:.{}g}", mag, prec < 0 ? 6 : std::max(prec, 1)); break;
    case '%': body = fmt::format("{:.{}f}", mag * 100.0, prec < 0 ? 6 : prec) + "%"; break;
    case 0:
    case 'n':
        if (prec < 0) {
            body = format_float(mag);
        } else {
            body = fmt::format("{:.{}g}", mag, std::max(prec, 1));
            if (body.find_first_of(".e") == std::string::npos && std::isfinite(mag) && type == 0)
                body += ".0";
        }
        break;
    default:
        in.raise("ValueError", fmt::format("Unknown format code '{}' for object of type 'float'", type));
    }
    if (std::isinf(mag))
        body = "inf";
    if (std::isnan(d))
        body = "nan";
    if (type == 'E' || type == 'G' || type == 'F')
        std::transform(body.begin(), body.end(), body.begin(), [](unsigned char c) { return std::toupper(c); });
    if (spec.grouping) {
        auto end = body.find_first_not_of("0123456789");
        std::string int_part = body.substr(0, end);
        body = group_digits(int_part, spec.grouping) + (end == std::string::npos ? "" : body.substr(end));
    }
    std::string sign = negative ? "-" : spec.sign == '+' ? "+" : spec.sign == ' ' ? " " : "";
    return pad(sign + body, spec, '>', sign.size());
}

}  // namespace

bool is_exception_subclass(const std::string& type, const std::string& base)
{
    const auto& parents = exception_parents();
    std::string t = type;
    for (int guard = 0; guard < 16; ++guard) {
        if (t == base)
            return true;
        auto it = parents.find(t);
        if (it == parents.end() || it->second.empty())
            return false;
        t = it->second;
    }
    return false;
}

std::string format_with_spec(Interp& in, const Value& v, std::string_view spec_text)
{
    if (spec_text.empty())
        return str(v);
    Spec spec = parse_spec(in, spec_text);
    if (v.is_number() && spec.type != 's')
        return format_number(in, v, spec);
    if (spec.type && spec.type != 's')
        in.raise("ValueError",
                 fmt::format("Unknown format code '{}' for object of type '{}'", spec.type, type_name(v)));
    std::string s = str(v);
    if (spec.precision >= 0 && s.size() > static_cast<std::size_t>(spec.precision))
        s.resize(static_cast<std::size_t>(spec.precision));
    return pad(s, spec, '<');
}

std::string percent_format(Interp& in, const std::string& text, const Value& args)
{
    std::vector<Value> values;
    std::shared_ptr<DictObj> mapping;
    if (args.is<std::shared_ptr<TupleObj>>())
        values = args.as<std::shared_ptr<TupleObj>>()->items;
    else if (args.is<std::shared_ptr<DictObj>>() && !args.as<std::shared_ptr<DictObj>>()->is_set)
        mapping = args.as<std::shared_ptr<DictObj>>();
    else
        values.push_back(args);
    std::size_t next = 0;
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '%') {
            out += text[i];
            continue;
        }
        if (++i >= text.size())
            in.raise("ValueError", "incomplete format");
        if (text[i] == '%') {
            out += '%';
            continue;
        }
        std::optional<Value> keyed;
        if (text[i] == '(') {
            auto close = text.find(')', i);
            if (close == std::string::npos || !mapping)
                in.raise("TypeError", "format requires a mapping");
            Value key(text.substr(i + 1, close - i - 1));
            const Value* found = mapping->find(key);
            if (!found)
                in.raise("KeyError", repr(key));
            keyed = *found;
            i = close + 1;
        }
        std::string flags;
        while (i < text.size() && std::string("-+ 0#").find(text[i]) != std::string::npos)
            flags += text[i++];
        std::string width;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
            width += text[i++];
        std::string precision;
        if (i < text.size() && text[i] == '.') {
            ++i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
                precision += text[i++];
            if (precision.empty())
                precision = "0";
        }
        if (i >= text.size())
            in.raise("ValueError", "incomplete format");
        char conv = text[i];
        Value v;
        if (keyed) {
            v = *keyed;
        } else {
            if (next >= values.size())
                in.raise("TypeError", "not enough arguments for format string");
            v = values[next++];
        }
        std::string spec;
        if (flags.find('-') != std::string::npos)
            spec += '<';
        if (flags.find('+') != std::string::npos)
            spec += '+';
        else if (flags.find(' ') != std::string::npos)
            spec += ' ';
        if (flags.find('#') != std::string::npos)
            spec += '#';
        if (flags.find('0') != std::string::npos && flags.find('-') == std::string::npos)
            spec += '0';
        spec += width;
        if (!precision.empty())
            spec += "." + precision;
        switch (conv) {
        case 's': out += format_with_spec(in, Value(str(v)), spec.empty() ? "" : spec + "s"); break;
        case 'r':
        case 'a': out += format_with_spec(in, Value(repr(v)), spec.empty() ? "" : spec + "s"); break;
        case 'd':
        case 'i':
        case 'u': {
            if (!v.is_number())
                in.raise("TypeError", fmt::format("%{} format: a real number is required, not {}", conv,
                                                  type_name(v)));
            Value iv = v.is<double>() ? Value(float_to_int(in, v.as<double>())) : v;
            out += format_with_spec(in, iv, spec + "d");
            break;
        }
        case 'f':
        case 'F':
        case 'e':
        case 'E':
        case 'g':
        case 'G':
            if (!v.is_number())
                in.raise("TypeError", fmt::format("must be real number, not {}", type_name(v)));
            out += format_with_spec(in, Value(expect_float(in, v, "%")), spec + conv);
            break;
        case 'x':
        case 'X':
        case 'o':
        case 'c': out += format_with_spec(in, v, spec + conv); break;
        default:
            in.raise("ValueError", fmt::format("unsupported format character '{}' (0x{:x})", conv,
                                               static_cast<unsigned char>(conv)));
        }
    }
    if (next < values.size() && !mapping)
        in.raise("TypeError", "not all arguments converted during string formatting");
    return out;
}

namespace {

std::string str_format(Interp& in, const std::string& text, Args& args, Kwargs& kwargs)
{
    std::string out;
    std::size_t auto_index = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '}') {
            if (i + 1 < text.size() && text[i + 1] == '}')
                ++i;
            else
                in.raise("ValueError", "Single '}' encountered in format string");
            out += '}';
            continue;
        }
        if (c != '{') {
            out += c;
            continue;
        }
        if (i + 1 < text.size() && text[i + 1] == '{') {
            out += '{';
            ++i;
            continue;
        }
        int depth = 1;
        std::size_t j = i + 1;
        for (; j < text.size() && depth; ++j) {
            if (text[j] == '{')
                ++depth;
            else if (text[j] == '}')
                --depth;
        }
        if (depth)
            in.raise("ValueError", "expected '}' before end of string");
        std::string field = text.substr(i + 1, j - i - 2);
        i = j - 1;
        std::string spec;
        char conversion = 0;
        if (auto colon = field.find(':'); colon != std::string::npos) {
            spec = field.substr(colon + 1);
            field.resize(colon);
        }
        if (auto bang = field.find('!'); bang != std::string::npos) {
            if (bang + 1 < field.size())
                conversion = field[bang + 1];
            field.resize(bang);
        }
        // Nested replacement fields inside the spec, e.g. {:{width}}.
        if (spec.find('{') != std::string::npos)
            spec = str_format(in, spec, args, kwargs);
        std::string head = field.substr(0, field.find_first_of(".["));
        std::string rest = field.substr(head.size());
        Value v;
        if (head.empty()) {
            if (auto_index >= args.size())
                in.raise("IndexError", "Replacement index out of range for positional args tuple");
            v = args[auto_index++];
        } else if (std::all_of(head.begin(), head.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
            std::size_t idx = std::stoul(head);
            if (idx >= args.size())
                in.raise("IndexError", "Replacement index out of range for positional args tuple");
            v = args[idx];
        } else {
            auto it = std::find_if(kwargs.begin(), kwargs.end(), [&](const auto& kv) { return kv.first == head; });
            if (it == kwargs.end())
                in.raise("KeyError", repr(Value(head)));
            v = it->second;
        }
        while (!rest.empty()) {
            if (rest[0] == '.') {
                auto end = rest.find_first_of(".[", 1);
                v = in.getattr(v, rest.substr(1, end - 1));
                rest = end == std::string::npos ? "" : rest.substr(end);
            } else {
                auto close = rest.find(']');
                std::string key = rest.substr(1, close - 1);
                bool numeric = !key.empty() &&
                               std::all_of(key.begin(), key.end(), [](unsigned char ch) { return std::isdigit(ch); });
                v = in.subscript(v, numeric ? Value(static_cast<std::int64_t>(std::stoll(key))) : Value(key));
                rest = rest.substr(close + 1);
            }
        }
        if (conversion == 'r' || conversion == 'a')
            v = Value(repr(v));
        else if (conversion == 's')
            v = Value(str(v));
        out += format_with_spec(in, v, spec);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sorting and iteration helpers
// ---------------------------------------------------------------------------

void sort_values(Interp& in, std::vector<Value>& items, const std::optional<Value>& key, bool reverse)
{
    std::vector<std::pair<Value, Value>> keyed;
    keyed.reserve(items.size());
    for (auto& item : items)
        keyed.emplace_back(key && !key->is_none() ? in.call(*key, {item}) : item, item);
    std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        return reverse ? in.less(b.first, a.first) : in.less(a.first, b.first);
    });
    for (std::size_t i = 0; i < items.size(); ++i)
        items[i] = std::move(keyed[i].second);
}

Value min_max(Interp& in, const char* name, Args& args, Kwargs& kwargs, bool want_max)
{
    std::optional<Value> key, dflt;
    for (auto& [k, v] : kwargs) {
        if (k == "key")
            key = v;
        else if (k == "default")
            dflt = v;
        else
            in.raise("TypeError", fmt::format("{}() got an unexpected keyword argument '{}'", name, k));
    }
    std::vector<Value> items = args.size() == 1 ? in.to_vector(args[0]) : args;
    if (items.empty()) {
        if (dflt)
            return *dflt;
        in.raise("ValueError", fmt::format("{}() arg is an empty sequence", name));
    }
    Value best = items[0];
    Value best_key = key && !key->is_none() ? in.call(*key, {best}) : best;
    for (std::size_t i = 1; i < items.size(); ++i) {
        Value k = key && !key->is_none() ? in.call(*key, {items[i]}) : items[i];
        if (want_max ? in.less(best_key, k) : in.less(k, best_key)) {
            best = items[i];
            best_key = k;
        }
    }
    return best;
}

std::string read_file(Interp& in, const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        std::error_code ec;
        if (std::filesystem::is_directory(path, ec))
            in.raise("IsADirectoryError", fmt::format("[Errno 21] Is a directory: {}", repr(Value(path))));
        in.raise("FileNotFoundError", fmt::format("[Errno 2] No such file or directory: {}", repr(Value(path))));
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Value open_file(Interp& in, Args& args, Kwargs& kwargs)
{
    ArgReader a(in, "open", args, kwargs);
    std::string path = expect_str(in, a.get(0, "file"), "open() path");
    std::string mode = a.opt(1, "mode") ? expect_str(in, *a.opt(1, "mode"), "open() mode") : "r";
    auto f = std::make_shared<FileObj>();
    f->path = path;
    f->mode = mode.find('w') != std::string::npos ? 'w' : mode.find('a') != std::string::npos ? 'a' : 'r';
    if (f->mode == 'r') {
        f->content = read_file(in, path);
    } else {
        std::ofstream out(path, f->mode == 'w' ? std::ios::binary | std::ios::trunc : std::ios::binary | std::ios::app);
        if (!out)
            in.raise("FileNotFoundError", fmt::format("[Errno 2] No such file or directory: {}", repr(Value(path))));
    }
    return Value(f);
}

Value type_object(Interp& in, const Value& v)
{
    std::string name = v.is<std::shared_ptr<ExceptionObj>>() ? v.as<std::shared_ptr<ExceptionObj>>()->type
                                                             : type_name(v);
    if (auto it = in.builtins.find(name); it != in.builtins.end())
        return it->second;
    auto b = std::make_shared<BuiltinObj>();
    b->name = name;
    b->is_type = true;
    b->fn = [name](Interp& i, Args&, Kwargs&) -> Value {
        i.raise("TypeError", fmt::format("cannot create '{}' instances", name));
    };
    return Value(b);
}

bool isinstance_of(Interp& in, const Value& v, const Value& cls)
{
    if (cls.is<std::shared_ptr<TupleObj>>()) {
        for (const auto& c : cls.as<std::shared_ptr<TupleObj>>()->items)
            if (isinstance_of(in, v, c))
                return true;
        return false;
    }
    if (!cls.is<std::shared_ptr<BuiltinObj>>())
        in.raise("TypeError", "isinstance() arg 2 must be a type or tuple of types");
    auto b = cls.as<std::shared_ptr<BuiltinObj>>();
    if (b->is_exception_type)
        return v.is<std::shared_ptr<ExceptionObj>>() &&
               is_exception_subclass(v.as<std::shared_ptr<ExceptionObj>>()->type, b->name);
    if (!b->is_type)
        in.raise("TypeError", "isinstance() arg 2 must be a type or tuple of types");
    if (b->name == "object")
        return true;
    if (b->name == "int" && v.is<bool>())
        return true;
    return type_name(v) == b->name;
}

Value make_type(const std::string& name, NativeFn fn)
{
    auto b = std::make_shared<BuiltinObj>();
    b->name = name;
    b->fn = std::move(fn);
    b->is_type = true;
    return Value(b);
}

std::vector<Value> dict_items(const DictObj& d)
{
    std::vector<Value> out;
    for (auto& [k, v] : d.entries)
        out.push_back(make_tuple({k, v}));
    return out;
}

void dict_update(Interp& in, DictObj& d, const Value& other)
{
    if (other.is<std::shared_ptr<DictObj>>()) {
        for (auto& [k, v] : other.as<std::shared_ptr<DictObj>>()->entries)
            d.set(k, v);
        return;
    }
    for (auto& pair : in.to_vector(other)) {
        auto kv = in.to_vector(pair);
        if (kv.size() != 2)
            in.raise("ValueError", fmt::format("dictionary update sequence element has length {}; 2 is required",
                                               kv.size()));
        if (!hash_key(kv[0]))
            in.raise("TypeError", fmt::format("unhashable type: '{}'", type_name(kv[0])));
        d.set(kv[0], kv[1]);
    }
}

Value set_from(Interp& in, const Value& iterable)
{
    Value out = make_set();
    auto& d = *out.as<std::shared_ptr<DictObj>>();
    in.for_each(iterable, [&](const Value& v) {
        if (!hash_key(v))
            in.raise("TypeError", fmt::format("unhashable type: '{}'", type_name(v)));
        d.set(v, none);
        return true;
    });
    return out;
}

std::int64_t round_half_even(double d)
{
    return static_cast<std::int64_t>(std::nearbyint(d));
}

}  // namespace

// ---------------------------------------------------------------------------
// Builtin functions
// ---------------------------------------------------------------------------

void install_builtins(Interp& in)
{
    auto& b = in.builtins;
    auto def = [&](const std::string& name, NativeFn fn) { b[name] = make_builtin(name, std::move(fn)); };

    for (auto& [name, parent] : exception_parents())
        if (name != "error" && name != "JSONDecodeError" && name != "StatisticsError")
            b[name] = make_exception_type(name);
    b["IOError"] = b["OSError"];

    def("print", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        std::string sep = " ", end = "\n";
        std::shared_ptr<FileObj> file;
        for (auto& [k, v] : kwargs) {
            if (k == "sep" && !v.is_none())
                sep = expect_str(in, v, "sep");
            else if (k == "end" && !v.is_none())
                end = expect_str(in, v, "end");
            else if (k == "file" && v.is<std::shared_ptr<FileObj>>())
                file = v.as<std::shared_ptr<FileObj>>();
        }
        std::string text;
        for (std::size_t i = 0; i < args.size(); ++i)
            text += (i ? sep : "") + str(args[i]);
        text += end;
        if (file) {
            Value w = in.getattr(Value(file), "write");
            in.call(w, {Value(text)});
        } else {
            in.write_stdout(text);
        }
        return none;
    });
    def("len", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "len", args, kwargs);
        a.at_most(1);
        return Value(length_of(in, a.get(0, "obj")));
    });
    b["range"] = make_type("range", [](Interp& in, Args& args, Kwargs&) -> Value {
        auto r = std::make_shared<RangeObj>();
        if (args.empty() || args.size() > 3)
            in.raise("TypeError", fmt::format("range expected 1 to 3 arguments, got {}", args.size()));
        if (args.size() == 1) {
            r->stop = expect_int(in, args[0], "range() argument");
        } else {
            r->start = expect_int(in, args[0], "range() argument");
            r->stop = expect_int(in, args[1], "range() argument");
            if (args.size() == 3)
                r->step = expect_int(in, args[2], "range() argument");
        }
        if (r->step == 0)
            in.raise("ValueError", "range() arg 3 must not be zero");
        return Value(r);
    });
    b["int"] = make_type("int", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "int", args, kwargs);
        auto v = a.opt(0, "x");
        if (!v)
            return Value(std::int64_t{0});
        return to_int(in, *v, a.opt(1, "base"));
    });
    b["float"] = make_type("float", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.empty())
            return Value(0.0);
        return to_float(in, args[0]);
    });
    b["str"] = make_type("str", [](Interp&, Args& args, Kwargs&) -> Value {
        return args.empty() ? Value(std::string{}) : Value(str(args[0]));
    });
    b["bool"] = make_type("bool", [](Interp&, Args& args, Kwargs&) -> Value {
        return Value(!args.empty() && truthy(args[0]));
    });
    b["list"] = make_type("list", [](Interp& in, Args& args, Kwargs&) -> Value {
        return args.empty() ? make_list() : make_list(in.to_vector(args[0]));
    });
    b["tuple"] = make_type("tuple", [](Interp& in, Args& args, Kwargs&) -> Value {
        return args.empty() ? make_tuple() : make_tuple(in.to_vector(args[0]));
    });
    b["set"] = make_type("set", [](Interp& in, Args& args, Kwargs&) -> Value {
        return args.empty() ? make_set() : set_from(in, args[0]);
    });
    b["frozenset"] = b["set"];
    b["dict"] = make_type("dict", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        Value out = make_dict();
        auto& d = *out.as<std::shared_ptr<DictObj>>();
        if (!args.empty())
            dict_update(in, d, args[0]);
        for (auto& [k, v] : kwargs)
            d.set(Value(k), v);
        return out;
    });
    b["object"] = make_type("object", [](Interp& in, Args&, Kwargs&) -> Value {
        in.raise("TypeError", "object() instances are not supported by this executor");
    });
    b["type"] = make_type("type", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 1)
            in.raise("TypeError", "type() takes 1 argument");
        return type_object(in, args[0]);
    });
    def("isinstance", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 2)
            in.raise("TypeError", fmt::format("isinstance expected 2 arguments, got {}", args.size()));
        return Value(isinstance_of(in, args[0], args[1]));
    });
    def("repr", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        return Value(repr(ArgReader(in, "repr", args, kwargs).get(0, "obj")));
    });
    def("ascii", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        return Value(repr(ArgReader(in, "ascii", args, kwargs).get(0, "obj")));
    });
    def("format", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "format", args, kwargs);
        auto spec = a.opt(1, "format_spec");
        return Value(format_with_spec(in, a.get(0, "value"), spec ? expect_str(in, *spec, "format spec") : ""));
    });
    def("hash", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 1)
            in.raise("TypeError", "hash() takes exactly one argument");
        auto k = hash_key(args[0]);
        if (!k)
            in.raise("TypeError", fmt::format("unhashable type: '{}'", type_name(args[0])));
        return Value(static_cast<std::int64_t>(std::hash<std::string>{}(*k) >> 1));
    });
    def("abs", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 1)
            in.raise("TypeError", "abs() takes exactly one argument");
        const Value& v = args[0];
        if (v.is<double>())
            return Value(std::fabs(v.as<double>()));
        std::int64_t i = expect_int(in, v, "abs() argument");
        if (i == INT64_MIN)
            in.raise("OverflowError", "integer result exceeds the 64-bit range supported by this executor");
        return Value(i < 0 ? -i : i);
    });
    def("round", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "round", args, kwargs);
        Value v = a.get(0, "number");
        auto nd = a.opt(1, "ndigits");
        if (!nd || nd->is_none()) {
            if (!v.is<double>())
                return Value(expect_int(in, v, "round() argument"));
            double d = v.as<double>();
            if (!std::isfinite(d))
                in.raise(std::isnan(d) ? "ValueError" : "OverflowError", "cannot convert float to integer");
            return Value(round_half_even(d));
        }
        std::int64_t n = expect_int(in, *nd, "ndigits");
        if (!v.is<double>()) {
            std::int64_t i = expect_int(in, v, "round() argument");
            if (n >= 0)
                return Value(i);
            double scale = std::pow(10.0, static_cast<double>(-n));
            return Value(static_cast<std::int64_t>(std::nearbyint(static_cast<double>(i) / scale) * scale));
        }
        double d = v.as<double>();
        if (!std::isfinite(d))
            return v;
        if (n >= 0) {
            std::string text = fmt::format("{:.{}f}", d, std::min<std::int64_t>(n, 300));
            return Value(std::strtod(text.c_str(), nullptr));
        }
        double scale = std::pow(10.0, static_cast<double>(-n));
        return Value(std::nearbyint(d / scale) * scale);
    });
    def("divmod", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 2)
            in.raise("TypeError", "divmod expected 2 arguments");
        return make_tuple({in.binop(BinOpKind::floordiv, args[0], args[1]),
                           in.binop(BinOpKind::mod, args[0], args[1])});
    });
    def("pow", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() == 3) {
            std::int64_t base = expect_int(in, args[0], "pow() base");
            std::int64_t exp = expect_int(in, args[1], "pow() exponent");
            std::int64_t mod = expect_int(in, args[2], "pow() modulus");
            if (mod == 0)
                in.raise("ValueError", "pow() 3rd argument cannot be 0");
            __int128 result = 1, b2 = ((base % mod) + mod) % mod;
            while (exp > 0) {
                if (exp & 1)
                    result = result * b2 % mod;
                b2 = b2 * b2 % mod;
                exp >>= 1;
            }
            return Value(static_cast<std::int64_t>(result));
        }
        if (args.size() != 2)
            in.raise("TypeError", "pow expected 2 or 3 arguments");
        return in.binop(BinOpKind::pow, args[0], args[1]);
    });
    def("sum", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "sum", args, kwargs);
        Value total = a.opt(1, "start").value_or(Value(std::int64_t{0}));
        in.for_each(a.get(0, "iterable"), [&](const Value& v) {
            total = in.binop(BinOpKind::add, total, v);
            return true;
        });
        return total;
    });
    def("min", [](Interp& in, Args& args, Kwargs& kwargs) { return min_max(in, "min", args, kwargs, false); });
    def("max", [](Interp& in, Args& args, Kwargs& kwargs) { return min_max(in, "max", args, kwargs, true); });
    def("sorted", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "sorted", args, kwargs);
        a.at_most(1);
        auto items = in.to_vector(a.get(0, "iterable"));
        auto rev = a.opt(99, "reverse");
        sort_values(in, items, a.opt(99, "key"), rev && truthy(*rev));
        return make_list(std::move(items));
    });
    def("reversed", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 1)
            in.raise("TypeError", "reversed expected 1 argument");
        if (args[0].is<std::shared_ptr<DictObj>>() && args[0].as<std::shared_ptr<DictObj>>()->is_set)
            in.raise("TypeError", "'set' object is not reversible");
        auto items = in.to_vector(args[0]);
        std::reverse(items.begin(), items.end());
        return make_list(std::move(items));
    });
    def("enumerate", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "enumerate", args, kwargs);
        std::int64_t i = a.opt(1, "start") ? expect_int(in, *a.opt(1, "start"), "start") : 0;
        std::vector<Value> out;
        in.for_each(a.get(0, "iterable"), [&](const Value& v) {
            out.push_back(make_tuple({Value(i++), v}));
            return true;
        });
        return make_list(std::move(out));
    });
    def("zip", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::vector<std::vector<Value>> seqs;
        std::size_t n = SIZE_MAX;
        for (auto& a : args) {
            seqs.push_back(in.to_vector(a));
            n = std::min(n, seqs.back().size());
        }
        if (seqs.empty())
            n = 0;
        std::vector<Value> out;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<Value> row;
            for (auto& s : seqs)
                row.push_back(s[i]);
            out.push_back(make_tuple(std::move(row)));
        }
        return make_list(std::move(out));
    });
    def("map", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() < 2)
            in.raise("TypeError", "map() must have at least two arguments.");
        std::vector<std::vector<Value>> seqs;
        std::size_t n = SIZE_MAX;
        for (std::size_t i = 1; i < args.size(); ++i) {
            seqs.push_back(in.to_vector(args[i]));
            n = std::min(n, seqs.back().size());
        }
        std::vector<Value> out;
        for (std::size_t i = 0; i < n; ++i) {
            Args call_args;
            for (auto& s : seqs)
                call_args.push_back(s[i]);
            out.push_back(in.call(args[0], std::move(call_args)));
        }
        return make_list(std::move(out));
    });
    def("filter", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 2)
            in.raise("TypeError", "filter expected 2 arguments");
        std::vector<Value> out;
        in.for_each(args[1], [&](const Value& v) {
            if (args[0].is_none() ? truthy(v) : truthy(in.call(args[0], {v})))
                out.push_back(v);
            return true;
        });
        return make_list(std::move(out));
    });
    def("any", [](Interp& in, Args& args, Kwargs&) -> Value {
        bool found = false;
        in.for_each(args.at(0), [&](const Value& v) {
            found = truthy(v);
            return !found;
        });
        return Value(found);
    });
    def("all", [](Interp& in, Args& args, Kwargs&) -> Value {
        bool ok = true;
        in.for_each(args.at(0), [&](const Value& v) {
            ok = truthy(v);
            return ok;
        });
        return Value(ok);
    });
    def("iter", [](Interp& in, Args& args, Kwargs&) -> Value { return make_list(in.to_vector(args.at(0))); });
    def("next", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.empty() || !args[0].is<std::shared_ptr<ListObj>>())
            in.raise("TypeError", "next() is only supported on iter() results by this executor");
        auto& items = args[0].as<std::shared_ptr<ListObj>>()->items;
        if (items.empty()) {
            if (args.size() > 1)
                return args[1];
            in.raise("StopIteration", "");
        }
        Value v = items.front();
        items.erase(items.begin());
        return v;
    });
    def("chr", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::int64_t c = expect_int(in, args.at(0), "chr() argument");
        if (c < 0 || c > 0x10FFFF)
            in.raise("ValueError", "chr() arg not in range(0x110000)");
        std::string out;
        auto u = static_cast<std::uint32_t>(c);
        if (u < 0x80) {
            out += static_cast<char>(u);
        } else if (u < 0x800) {
            out += static_cast<char>(0xC0 | (u >> 6));
            out += static_cast<char>(0x80 | (u & 0x3F));
        } else if (u < 0x10000) {
            out += static_cast<char>(0xE0 | (u >> 12));
            out += static_cast<char>(0x80 | ((u >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (u & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (u >> 18));
            out += static_cast<char>(0x80 | ((u >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((u >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (u & 0x3F));
        }
        return Value(out);
    });
    def("ord", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string s = expect_str(in, args.at(0), "ord() argument");
        if (s.empty())
            in.raise("TypeError", "ord() expected a character, but string of length 0 found");
        auto c = static_cast<unsigned char>(s[0]);
        if (c < 0x80) {
            if (s.size() != 1)
                in.raise("TypeError",
                         fmt::format("ord() expected a character, but string of length {} found", s.size()));
            return Value(std::int64_t{c});
        }
        int extra = c >= 0xF0 ? 3 : c >= 0xE0 ? 2 : 1;
        if (s.size() != static_cast<std::size_t>(extra + 1))
            in.raise("TypeError", "ord() expected a character");
        std::int64_t cp = c & (0x3F >> extra);
        for (int i = 1; i <= extra; ++i)
            cp = (cp << 6) | (static_cast<unsigned char>(s[static_cast<std::size_t>(i)]) & 0x3F);
        return Value(cp);
    });
    def("hex", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(format_with_spec(in, Value(expect_int(in, args.at(0), "hex() argument")), "#x"));
    });
    def("oct", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(format_with_spec(in, Value(expect_int(in, args.at(0), "oct() argument")), "#o"));
    });
    def("bin", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(format_with_spec(in, Value(expect_int(in, args.at(0), "bin() argument")), "#b"));
    });
    def("callable", [](Interp&, Args& args, Kwargs&) -> Value {
        const Value& v = args.at(0);
        return Value(v.is<std::shared_ptr<FunctionObj>>() || v.is<std::shared_ptr<BuiltinObj>>());
    });
    def("getattr", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() < 2)
            in.raise("TypeError", "getattr expected at least 2 arguments");
        std::string name = expect_str(in, args[1], "attribute name");
        if (args.size() < 3)
            return in.getattr(args[0], name);
        try {
            return in.getattr(args[0], name);
        } catch (const PyError& e) {
            if (e.type != "AttributeError")
                throw;
            return args[2];
        }
    });
    def("hasattr", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 2)
            in.raise("TypeError", "hasattr expected 2 arguments");
        try {
            in.getattr(args[0], expect_str(in, args[1], "attribute name"));
            return Value(true);
        } catch (const PyError& e) {
            if (e.type != "AttributeError")
                throw;
            return Value(false);
        }
    });
    def("open", open_file);
    def("input", [](Interp& in, Args&, Kwargs&) -> Value {
        in.raise("OSError", "reading from stdin is not supported");
    });

    // Framework hooks available to every snippet.
    def("submit_final_answer", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "submit_final_answer", args, kwargs);
        a.at_most(1);
        in.pending_final_answer = str(a.get(0, "answer"));
        return none;
    });
    def("get_relevant_actions", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader a(in, "get_relevant_actions", args, kwargs);
        a.at_most(2);
        std::string query = expect_str(in, a.get(0, "query"), "query");
        std::optional<std::int64_t> k;
        if (auto kv = a.opt(1, "k"); kv && !kv->is_none()) {
            k = expect_int(in, *kv, "k");
            if (*k < 1)
                in.raise("ValueError", "k must be a positive integer");
        }
        if (!in.hooks.retrieve)
            in.raise("RuntimeError", "action retrieval is not available in this session");
        std::string text;
        try {
            text = in.hooks.retrieve(query, k);
        } catch (const Error& e) {
            in.raise("RuntimeError", fmt::format("action retrieval failed: {}", e.what()));
        }
        in.write_stdout(text);
        if (text.empty() || text.back() != '\n')
            in.write_stdout("\n");
        return none;
    });

}

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

namespace {

using Method = std::function<Value(Interp&, Args&, Kwargs&)>;

Value bound(const std::string& name, Method fn)
{
    return make_builtin(name, std::move(fn));
}

std::vector<std::string> split_whitespace(const std::string& s, std::int64_t maxsplit)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && whitespace.find(s[i]) != std::string::npos)
            ++i;
        if (i >= s.size())
            break;
        if (maxsplit >= 0 && static_cast<std::int64_t>(out.size()) == maxsplit) {
            out.push_back(strip_chars(s.substr(i), whitespace, false, true));
            break;
        }
        std::size_t j = i;
        while (j < s.size() && whitespace.find(s[j]) == std::string::npos)
            ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> split_on(const std::string& s, const std::string& sep, std::int64_t maxsplit)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (maxsplit < 0 || static_cast<std::int64_t>(out.size()) < maxsplit) {
        auto pos = s.find(sep, start);
        if (pos == std::string::npos)
            break;
        out.push_back(s.substr(start, pos - start));
        start = pos + sep.size();
    }
    out.push_back(s.substr(start));
    return out;
}

Value string_list(const std::vector<std::string>& parts)
{
    std::vector<Value> out;
    for (auto& p : parts)
        out.emplace_back(p);
    return make_list(std::move(out));
}

bool all_chars(const std::string& s, int (*pred)(int))
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [&](unsigned char c) { return pred(c) != 0; });
}

std::int64_t clamp_index(std::int64_t i, std::int64_t n)
{
    if (i < 0)
        i = std::max<std::int64_t>(0, i + n);
    return std::min(i, n);
}

Value string_method(Interp& in, const std::string& s, const std::string& name)
{
    auto simple = [&](auto fn) {
        return bound(name, [s, fn](Interp&, Args&, Kwargs&) -> Value { return fn(s); });
    };
    if (name == "lower" || name == "casefold")
        return simple([](std::string t) {
            std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
            return Value(t);
        });
    if (name == "upper")
        return simple([](std::string t) {
            std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
            return Value(t);
        });
    if (name == "title" || name == "capitalize")
        return simple([title = name == "title"](std::string t) {
            bool start = true;
            for (auto& ch : t) {
                auto c = static_cast<unsigned char>(ch);
                ch = static_cast<char>(start ? std::toupper(c) : std::tolower(c));
                start = title ? !std::isalpha(c) : false;
            }
            return Value(t);
        });
    if (name == "swapcase")
        return simple([](std::string t) {
            for (auto& ch : t) {
                auto c = static_cast<unsigned char>(ch);
                ch = static_cast<char>(std::isupper(c) ? std::tolower(c) : std::toupper(c));
            }
            return Value(t);
        });
    if (name == "strip" || name == "lstrip" || name == "rstrip")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            std::string chars = whitespace;
            if (!args.empty() && !args[0].is_none())
                chars = expect_str(in, args[0], "strip arg");
            return Value(strip_chars(s, chars, name != "rstrip", name != "lstrip"));
        });
    if (name == "split" || name == "rsplit")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs& kwargs) -> Value {
            ArgReader a(in, name, args, kwargs);
            auto sep = a.opt(0, "sep");
            auto ms = a.opt(1, "maxsplit");
            std::int64_t maxsplit = ms ? expect_int(in, *ms, "maxsplit") : -1;
            if (!sep || sep->is_none()) {
                if (name == "rsplit" && maxsplit >= 0) {
                    auto parts = split_whitespace(s, -1);
                    if (static_cast<std::int64_t>(parts.size()) > maxsplit + 1) {
                        std::size_t keep = parts.size() - static_cast<std::size_t>(maxsplit);
                        std::string head;
                        std::size_t count = 0, pos = 0;
                        std::string t = strip_chars(s, whitespace, true, false);
                        for (; pos < t.size() && count < keep; ++count) {
                            pos = t.find(parts[count], pos) + parts[count].size();
                        }
                        std::vector<std::string> out{strip_chars(t.substr(0, pos), whitespace, true, true)};
                        out.insert(out.end(), parts.begin() + static_cast<std::ptrdiff_t>(keep), parts.end());
                        return string_list(out);
                    }
                    return string_list(parts);
                }
                return string_list(split_whitespace(s, maxsplit));
            }
            std::string sp = expect_str(in, *sep, "separator");
            if (sp.empty())
                in.raise("ValueError", "empty separator");
            if (name == "rsplit" && maxsplit >= 0) {
                auto parts = split_on(s, sp, -1);
                if (static_cast<std::int64_t>(parts.size()) <= maxsplit + 1)
                    return string_list(parts);
                std::size_t head_count = parts.size() - static_cast<std::size_t>(maxsplit);
                std::string head;
                for (std::size_t i = 0; i < head_count; ++i)
                    head += (i ? sp : "") + parts[i];
                std::vector<std::string> out{head};
                out.insert(out.end(), parts.begin() + static_cast<std::ptrdiff_t>(head_count), parts.end());
                return string_list(out);
            }
            return string_list(split_on(s, sp, maxsplit));
        });
    if (name == "splitlines")
        return bound(name, [s](Interp&, Args& args, Kwargs&) -> Value {
            bool keep = !args.empty() && truthy(args[0]);
            std::vector<std::string> out;
            std::size_t start = 0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (s[i] == '\n' || s[i] == '\r') {
                    std::size_t end = i;
                    if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n')
                        ++i;
                    out.push_back(s.substr(start, (keep ? i + 1 : end) - start));
                    start = i + 1;
                }
            }
            if (start < s.size())
                out.push_back(s.substr(start));
            return string_list(out);
        });
    if (name == "join")
        return bound(name, [s](Interp& in, Args& args, Kwargs&) -> Value {
            std::string out;
            std::size_t i = 0;
            in.for_each(args.at(0), [&](const Value& v) {
                if (!v.is<std::string>())
                    in.raise("TypeError", fmt::format("sequence item {}: expected str instance, {} found", i,
                                                      type_name(v)));
                out += (i++ ? s : "") + v.as<std::string>();
                return true;
            });
            return Value(out);
        });
    if (name == "replace")
        return bound(name, [s](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.size() < 2)
                in.raise("TypeError", "replace expected at least 2 arguments");
            std::string from = expect_str(in, args[0], "replace() argument 1");
            std::string to = expect_str(in, args[1], "replace() argument 2");
            std::int64_t count = args.size() > 2 ? expect_int(in, args[2], "count") : -1;
            std::string out;
            std::size_t pos = 0;
            std::int64_t done = 0;
            if (from.empty()) {
                for (std::size_t i = 0; i <= s.size(); ++i) {
                    if (count < 0 || done < count) {
                        out += to;
                        ++done;
                    }
                    if (i < s.size())
                        out += s[i];
                }
                return Value(out);
            }
            while (count < 0 || done < count) {
                auto hit = s.find(from, pos);
                if (hit == std::string::npos)
                    break;
                out += s.substr(pos, hit - pos) + to;
                pos = hit + from.size();
                ++done;
            }
            out += s.substr(pos);
            return Value(out);
        });
    if (name == "startswith" || name == "endswith")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            std::vector<Value> options;
            if (args.empty())
                in.raise("TypeError", fmt::format("{}() takes at least 1 argument (0 given)", name));
            if (args[0].is<std::shared_ptr<TupleObj>>())
                options = args[0].as<std::shared_ptr<TupleObj>>()->items;
            else
                options.push_back(args[0]);
            auto n = static_cast<std::int64_t>(s.size());
            std::int64_t lo = args.size() > 1 && !args[1].is_none() ? clamp_index(expect_int(in, args[1], "start"), n) : 0;
            std::int64_t hi = args.size() > 2 && !args[2].is_none() ? clamp_index(expect_int(in, args[2], "end"), n) : n;
            std::string view = lo <= hi ? s.substr(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)) : "";
            for (auto& o : options) {
                std::string p = expect_str(in, o, fmt::format("{} first arg", name));
                bool hit = name == "startswith" ? view.rfind(p, 0) == 0
                                                : view.size() >= p.size() &&
                                                      view.compare(view.size() - p.size(), p.size(), p) == 0;
                if (hit)
                    return Value(true);
            }
            return Value(false);
        });
    if (name == "find" || name == "rfind" || name == "index" || name == "rindex" || name == "count")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.empty())
                in.raise("TypeError", fmt::format("{}() takes at least 1 argument (0 given)", name));
            std::string sub = expect_str(in, args[0], "must be str");
            auto n = static_cast<std::int64_t>(s.size());
            std::int64_t lo = args.size() > 1 && !args[1].is_none() ? clamp_index(expect_int(in, args[1], "start"), n) : 0;
            std::int64_t hi = args.size() > 2 && !args[2].is_none() ? clamp_index(expect_int(in, args[2], "end"), n) : n;
            if (lo > hi)
                return Value(name == "count" ? std::int64_t{0} : std::int64_t{-1});
            std::string view = s.substr(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo));
            if (name == "count") {
                if (sub.empty())
                    return Value(static_cast<std::int64_t>(view.size() + 1));
                std::int64_t c = 0;
                for (auto p = view.find(sub); p != std::string::npos; p = view.find(sub, p + sub.size()))
                    ++c;
                return Value(c);
            }
            auto pos = (name == "find" || name == "index") ? view.find(sub) : view.rfind(sub);
            if (pos == std::string::npos) {
                if (name == "index" || name == "rindex")
                    in.raise("ValueError", "substring not found");
                return Value(std::int64_t{-1});
            }
            return Value(static_cast<std::int64_t>(pos) + lo);
        });
    if (name == "isdigit" || name == "isdecimal" || name == "isnumeric")
        return simple([](const std::string& t) { return Value(all_chars(t, ::isdigit)); });
    if (name == "isalpha")
        return simple([](const std::string& t) { return Value(all_chars(t, ::isalpha)); });
    if (name == "isalnum")
        return simple([](const std::string& t) { return Value(all_chars(t, ::isalnum)); });
    if (name == "isspace")
        return simple([](const std::string& t) { return Value(all_chars(t, ::isspace)); });
    if (name == "isupper" || name == "islower")
        return simple([upper = name == "isupper"](const std::string& t) {
            bool cased = false;
            for (unsigned char c : t) {
                if (std::isalpha(c)) {
                    cased = true;
                    if (upper ? std::islower(c) : std::isupper(c))
                        return Value(false);
                }
            }
            return Value(cased);
        });
    if (name == "isidentifier")
        return simple([](const std::string& t) { return Value(is_identifier(t)); });
    if (name == "format")
        return bound(name, [s](Interp& in, Args& args, Kwargs& kwargs) -> Value {
            return Value(str_format(in, s, args, kwargs));
        });
    if (name == "zfill")
        return bound(name, [s](Interp& in, Args& args, Kwargs&) -> Value {
            auto width = static_cast<std::size_t>(std::max<std::int64_t>(0, expect_int(in, args.at(0), "width")));
            if (s.size() >= width)
                return Value(s);
            std::size_t sign = !s.empty() && (s[0] == '+' || s[0] == '-') ? 1 : 0;
            return Value(s.substr(0, sign) + std::string(width - s.size(), '0') + s.substr(sign));
        });
    if (name == "center" || name == "ljust" || name == "rjust")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            Spec spec;
            spec.width = static_cast<int>(expect_int(in, args.at(0), "width"));
            spec.fill = args.size() > 1 ? expect_str(in, args[1], "fill character").at(0) : ' ';
            spec.align = name == "center" ? '^' : name == "ljust" ? '<' : '>';
            return Value(pad(s, spec, '<'));
        });
    if (name == "partition" || name == "rpartition")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            std::string sep = expect_str(in, args.at(0), "separator");
            if (sep.empty())
                in.raise("ValueError", "empty separator");
            auto pos = name == "partition" ? s.find(sep) : s.rfind(sep);
            if (pos == std::string::npos)
                return name == "partition" ? make_tuple({Value(s), Value(""), Value("")})
                                           : make_tuple({Value(""), Value(""), Value(s)});
            return make_tuple({Value(s.substr(0, pos)), Value(sep), Value(s.substr(pos + sep.size()))});
        });
    if (name == "removeprefix" || name == "removesuffix")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            std::string p = expect_str(in, args.at(0), "argument");
            if (name == "removeprefix" && s.rfind(p, 0) == 0)
                return Value(s.substr(p.size()));
            if (name == "removesuffix" && !p.empty() && s.size() >= p.size() &&
                s.compare(s.size() - p.size(), p.size(), p) == 0)
                return Value(s.substr(0, s.size() - p.size()));
            return Value(s);
        });
    if (name == "encode" || name == "decode")
        return simple([](const std::string& t) { return Value(t); });
    in.raise("AttributeError", fmt::format("'str' object has no attribute '{}'", name));
}

Value list_method(Interp& in, const std::shared_ptr<ListObj>& l, const std::string& name)
{
    if (name == "append")
        return bound(name, [l](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.size() != 1)
                in.raise("TypeError", fmt::format("list.append() takes exactly one argument ({} given)", args.size()));
            l->items.push_back(args[0]);
            return none;
        });
    if (name == "extend")
        return bound(name, [l](Interp& in, Args& args, Kwargs&) -> Value {
            auto more = in.to_vector(args.at(0));
            l->items.insert(l->items.end(), more.begin(), more.end());
            return none;
        });
    if (name == "insert")
        return bound(name, [l](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.size() != 2)
                in.raise("TypeError", "insert expected 2 arguments");
            auto i = clamp_index(expect_int(in, args[0], "index"), static_cast<std::int64_t>(l->items.size()));
            l->items.insert(l->items.begin() + i, args[1]);
            return none;
        });
    if (name == "pop")
        return bound(name, [l](Interp& in, Args& args, Kwargs&) -> Value {
            if (l->items.empty())
                in.raise("IndexError", "pop from empty list");
            auto n = static_cast<std::int64_t>(l->items.size());
            std::int64_t i = args.empty() ? n - 1 : expect_int(in, args[0], "index");
            if (i < 0)
                i += n;
            if (i < 0 || i >= n)
                in.raise("IndexError", "pop index out of range");
            Value v = l->items[static_cast<std::size_t>(i)];
            l->items.erase(l->items.begin() + i);
            return v;
        });
    if (name == "remove")
        return bound(name, [l](Interp& in, Args& args, Kwargs&) -> Value {
            auto it = std::find_if(l->items.begin(), l->items.end(),
                                   [&](const Value& v) { return equals(v, args.at(0)); });
            if (it == l->items.end())
                in.raise("ValueError", "list.remove(x): x not in list");
            l->items.erase(it);
            return none;
        });
    if (name == "index")
        return bound(name, [l](Interp& in, Args& args, Kwargs&) -> Value {
            auto it = std::find_if(l->items.begin(), l->items.end(),
                                   [&](const Value& v) { return equals(v, args.at(0)); });
            if (it == l->items.end())
                in.raise("ValueError", fmt::format("{} is not in list", repr(args.at(0))));
            return Value(static_cast<std::int64_t>(it - l->items.begin()));
        });
    if (name == "count")
        return bound(name, [l](Interp&, Args& args, Kwargs&) -> Value {
            return Value(static_cast<std::int64_t>(std::count_if(
                l->items.begin(), l->items.end(), [&](const Value& v) { return equals(v, args.at(0)); })));
        });
    if (name == "sort")
        return bound(name, [l](Interp& in, Args& args, Kwargs& kwargs) -> Value {
            ArgReader a(in, "sort", args, kwargs);
            a.at_most(0);
            auto rev = a.opt(99, "reverse");
            auto items = l->items;
            sort_values(in, items, a.opt(99, "key"), rev && truthy(*rev));
            l->items = std::move(items);
            return none;
        });
    if (name == "reverse")
        return bound(name, [l](Interp&, Args&, Kwargs&) -> Value {
            std::reverse(l->items.begin(), l->items.end());
            return none;
        });
    if (name == "copy")
        return bound(name, [l](Interp&, Args&, Kwargs&) -> Value { return make_list(l->items); });
    if (name == "clear")
        return bound(name, [l](Interp&, Args&, Kwargs&) -> Value {
            l->items.clear();
            return none;
        });
    in.raise("AttributeError", fmt::format("'list' object has no attribute '{}'", name));
}

Value dict_method(Interp& in, const std::shared_ptr<DictObj>& d, const std::string& name)
{
    if (name == "get")
        return bound(name, [d](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.empty())
                in.raise("TypeError", "get expected at least 1 argument, got 0");
            if (!hash_key(args[0]))
                in.raise("TypeError", fmt::format("unhashable type: '{}'", type_name(args[0])));
            if (const Value* v = d->find(args[0]))
                return *v;
            return args.size() > 1 ? args[1] : none;
        });
    if (name == "keys")
        return bound(name, [d](Interp&, Args&, Kwargs&) -> Value {
            std::vector<Value> out;
            for (auto& [k, v] : d->entries)
                out.push_back(k);
            return make_list(std::move(out));
        });
    if (name == "values")
        return bound(name, [d](Interp&, Args&, Kwargs&) -> Value {
            std::vector<Value> out;
            for (auto& [k, v] : d->entries)
                out.push_back(v);
            return make_list(std::move(out));
        });
    if (name == "items")
        return bound(name, [d](Interp&, Args&, Kwargs&) -> Value { return make_list(dict_items(*d)); });
    if (name == "pop")
        return bound(name, [d](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.empty())
                in.raise("TypeError", "pop expected at least 1 argument, got 0");
            if (const Value* v = d->find(args[0])) {
                Value out = *v;
                d->erase(args[0]);
                return out;
            }
            if (args.size() > 1)
                return args[1];
            in.raise("KeyError", repr(args[0]));
        });
    if (name == "popitem")
        return bound(name, [d](Interp& in, Args&, Kwargs&) -> Value {
            if (d->entries.empty())
                in.raise("KeyError", "'popitem(): dictionary is empty'");
            auto [k, v] = d->entries.back();
            d->erase(k);
            return make_tuple({k, v});
        });
    if (name == "setdefault")
        return bound(name, [d](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.empty())
                in.raise("TypeError", "setdefault expected at least 1 argument, got 0");
            if (!hash_key(args[0]))
                in.raise("TypeError", fmt::format("unhashable type: '{}'", type_name(args[0])));
            if (const Value* v = d->find(args[0]))
                return *v;
            Value dflt = args.size() > 1 ? args[1] : none;
            d->set(args[0], dflt);
            return dflt;
        });
    if (name == "update")
        return bound(name, [d](Interp& in, Args& args, Kwargs& kwargs) -> Value {
            if (!args.empty())
                dict_update(in, *d, args[0]);
            for (auto& [k, v] : kwargs)
                d->set(Value(k), v);
            return none;
        });
    if (name == "copy")
        return bound(name, [d](Interp&, Args&, Kwargs&) -> Value { return Value(std::make_shared<DictObj>(*d)); });
    if (name == "clear")
        return bound(name, [d](Interp&, Args&, Kwargs&) -> Value {
            d->entries.clear();
            d->index.clear();
            return none;
        });
    in.raise("AttributeError", fmt::format("'dict' object has no attribute '{}'", name));
}

Value set_method(Interp& in, const std::shared_ptr<DictObj>& s, const std::string& name)
{
    auto check = [](Interp& in, const Value& v) {
        if (!hash_key(v))
            in.raise("TypeError", fmt::format("unhashable type: '{}'", type_name(v)));
    };
    if (name == "add")
        return bound(name, [s, check](Interp& in, Args& args, Kwargs&) -> Value {
            check(in, args.at(0));
            s->set(args[0], none);
            return none;
        });
    if (name == "remove" || name == "discard")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            if (!s->erase(args.at(0)) && name == "remove")
                in.raise("KeyError", repr(args[0]));
            return none;
        });
    if (name == "pop")
        return bound(name, [s](Interp& in, Args&, Kwargs&) -> Value {
            if (s->entries.empty())
                in.raise("KeyError", "'pop from an empty set'");
            Value k = s->entries.front().first;
            s->erase(k);
            return k;
        });
    if (name == "update")
        return bound(name, [s, check](Interp& in, Args& args, Kwargs&) -> Value {
            for (auto& a : args)
                in.for_each(a, [&](const Value& v) {
                    check(in, v);
                    s->set(v, none);
                    return true;
                });
            return none;
        });
    if (name == "union" || name == "intersection" || name == "difference" || name == "symmetric_difference") {
        BinOpKind op = name == "union"          ? BinOpKind::bitor_
                       : name == "intersection" ? BinOpKind::bitand_
                       : name == "difference"   ? BinOpKind::sub
                                                : BinOpKind::bitxor;
        return bound(name, [s, op](Interp& in, Args& args, Kwargs&) -> Value {
            Value acc = Value(std::make_shared<DictObj>(*s));
            for (auto& a : args)
                acc = in.binop(op, acc, set_from(in, a));
            return acc;
        });
    }
    if (name == "issubset" || name == "issuperset" || name == "isdisjoint")
        return bound(name, [s, name](Interp& in, Args& args, Kwargs&) -> Value {
            Value other = set_from(in, args.at(0));
            auto& o = *other.as<std::shared_ptr<DictObj>>();
            const DictObj& small = name == "issuperset" ? o : *s;
            const DictObj& big = name == "issuperset" ? *s : o;
            if (name == "isdisjoint") {
                for (auto& [k, v] : s->entries)
                    if (o.find(k))
                        return Value(false);
                return Value(true);
            }
            for (auto& [k, v] : small.entries)
                if (!big.find(k))
                    return Value(false);
            return Value(true);
        });
    if (name == "copy")
        return bound(name, [s](Interp&, Args&, Kwargs&) -> Value { return Value(std::make_shared<DictObj>(*s)); });
    if (name == "clear")
        return bound(name, [s](Interp&, Args&, Kwargs&) -> Value {
            s->entries.clear();
            s->index.clear();
            return none;
        });
    in.raise("AttributeError", fmt::format("'set' object has no attribute '{}'", name));
}

Value file_method(Interp& in, const std::shared_ptr<FileObj>& f, const std::string& name)
{
    auto require_open = [](Interp& in, const FileObj& f) {
        if (f.closed)
            in.raise("ValueError", "I/O operation on closed file.");
    };
    if (name == "read")
        return bound(name, [f, require_open](Interp& in, Args& args, Kwargs&) -> Value {
            require_open(in, *f);
            if (f->mode != 'r')
                in.raise("OSError", "not readable");
            std::size_t n = f->content.size() - f->pos;
            if (!args.empty() && !args[0].is_none() && expect_int(in, args[0], "size") >= 0)
                n = std::min(n, static_cast<std::size_t>(expect_int(in, args[0], "size")));
            std::string out = f->content.substr(f->pos, n);
            f->pos += n;
            return Value(out);
        });
    if (name == "readline")
        return bound(name, [f, require_open](Interp& in, Args&, Kwargs&) -> Value {
            require_open(in, *f);
            auto nl = f->content.find('\n', f->pos);
            std::size_t end = nl == std::string::npos ? f->content.size() : nl + 1;
            std::string out = f->content.substr(f->pos, end - f->pos);
            f->pos = end;
            return Value(out);
        });
    if (name == "readlines")
        return bound(name, [f](Interp& in, Args&, Kwargs&) -> Value { return make_list(in.to_vector(Value(f))); });
    if (name == "write")
        return bound(name, [f, require_open](Interp& in, Args& args, Kwargs&) -> Value {
            require_open(in, *f);
            if (f->mode == 'r')
                in.raise("OSError", "not writable");
            std::string text = expect_str(in, args.at(0), "write() argument");
            std::ofstream out(f->path, std::ios::binary | std::ios::app);
            out << text;
            return Value(static_cast<std::int64_t>(text.size()));
        });
    if (name == "close")
        return bound(name, [f](Interp&, Args&, Kwargs&) -> Value {
            f->closed = true;
            return none;
        });
    if (name == "name")
        return Value(f->path);
    if (name == "closed")
        return Value(f->closed);
    in.raise("AttributeError", fmt::format("'TextIOWrapper' object has no attribute '{}'", name));
}

Value match_method(Interp& in, const std::shared_ptr<MatchObj>& m, const std::string& name)
{
    auto group_index = [m](Interp& in, const Value& g) -> std::size_t {
        if (g.is<std::string>()) {
            auto it = m->names.find(g.as<std::string>());
            if (it == m->names.end())
                in.raise("IndexError", "no such group");
            return it->second;
        }
        std::int64_t i = expect_int(in, g, "group index");
        if (i < 0 || static_cast<std::size_t>(i) >= m->groups.size())
            in.raise("IndexError", "no such group");
        return static_cast<std::size_t>(i);
    };
    auto group_value = [m](std::size_t i) { return m->groups[i] ? Value(*m->groups[i]) : none; };
    if (name == "group")
        return bound(name, [m, group_index, group_value](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.empty())
                return group_value(0);
            if (args.size() == 1)
                return group_value(group_index(in, args[0]));
            std::vector<Value> out;
            for (auto& a : args)
                out.push_back(group_value(group_index(in, a)));
            return make_tuple(std::move(out));
        });
    if (name == "groups")
        return bound(name, [m, group_value](Interp&, Args& args, Kwargs&) -> Value {
            std::vector<Value> out;
            for (std::size_t i = 1; i < m->groups.size(); ++i)
                out.push_back(m->groups[i] ? Value(*m->groups[i]) : (args.empty() ? none : args[0]));
            return make_tuple(std::move(out));
        });
    if (name == "groupdict")
        return bound(name, [m, group_value](Interp&, Args&, Kwargs&) -> Value {
            Value out = make_dict();
            for (auto& [k, i] : m->names)
                out.as<std::shared_ptr<DictObj>>()->set(Value(k), group_value(i));
            return out;
        });
    if (name == "start" || name == "end" || name == "span")
        return bound(name, [m, name, group_index](Interp& in, Args& args, Kwargs&) -> Value {
            std::size_t g = args.empty() ? 0 : group_index(in, args[0]);
            std::int64_t s = g == 0 ? m->start : m->starts[g];
            std::int64_t e = s < 0 ? -1 : s + static_cast<std::int64_t>(m->groups[g] ? m->groups[g]->size() : 0);
            if (name == "start")
                return Value(s);
            if (name == "end")
                return Value(e);
            return make_tuple({Value(s), Value(e)});
        });
    in.raise("AttributeError", fmt::format("'re.Match' object has no attribute '{}'", name));
}

}  // namespace

Value get_method(Interp& in, const Value& self, const std::string& name)
{
    if (self.is<std::string>())
        return string_method(in, self.as<std::string>(), name);
    if (self.is<std::shared_ptr<ListObj>>())
        return list_method(in, self.as<std::shared_ptr<ListObj>>(), name);
    if (self.is<std::shared_ptr<DictObj>>()) {
        auto d = self.as<std::shared_ptr<DictObj>>();
        return d->is_set ? set_method(in, d, name) : dict_method(in, d, name);
    }
    if (self.is<std::shared_ptr<TupleObj>>() && (name == "index" || name == "count")) {
        auto t = self.as<std::shared_ptr<TupleObj>>();
        auto as_list = std::make_shared<ListObj>();
        as_list->items = t->items;
        return list_method(in, as_list, name);
    }
    if (self.is<std::shared_ptr<FileObj>>())
        return file_method(in, self.as<std::shared_ptr<FileObj>>(), name);
    if (self.is<std::shared_ptr<MatchObj>>())
        return match_method(in, self.as<std::shared_ptr<MatchObj>>(), name);
    if (self.is<double>() && name == "is_integer") {
        double d = self.as<double>();
        return bound(name, [d](Interp&, Args&, Kwargs&) -> Value { return Value(std::isfinite(d) && d == std::floor(d)); });
    }
    if (self.is<std::int64_t>() && name == "bit_length") {
        std::int64_t i = self.as<std::int64_t>();
        return bound(name, [i](Interp&, Args&, Kwargs&) -> Value {
            std::uint64_t mag = i < 0 ? 0 - static_cast<std::uint64_t>(i) : static_cast<std::uint64_t>(i);
            return Value(static_cast<std::int64_t>(mag ? 64 - __builtin_clzll(mag) : 0));
        });
    }
    in.raise("AttributeError", fmt::format("'{}' object has no attribute '{}'", type_name(self), name));
}

}  // namespace dynact::minipy
