// Standard-library modules available to action code: math, os, os.path, json,
// re, csv, string, time, statistics and urllib.request.

#include "native.hpp"

#include "dynact/http.hpp"

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace dynact::minipy {

namespace {

namespace fs = std::filesystem;

using Attrs = std::map<std::string, Value>;

Value module(std::string name, Attrs attrs)
{
    auto m = std::make_shared<ModuleObj>();
    m->name = std::move(name);
    m->attrs = std::move(attrs);
    return Value(m);
}

Value exception_type(const std::string& name)
{
    auto b = std::make_shared<BuiltinObj>();
    b->name = name;
    b->is_exception_type = true;
    b->fn = [name](Interp&, Args& args, Kwargs&) -> Value {
        auto e = std::make_shared<ExceptionObj>();
        e->type = name;
        if (!args.empty())
            e->message = str(args[0]);
        return Value(e);
    };
    return Value(b);
}

[[noreturn]] void overflow(Interp& in)
{
    in.raise("OverflowError", "integer result exceeds the 64-bit range supported by this executor");
}

// ---------------------------------------------------------------------------
// math
// ---------------------------------------------------------------------------

std::int64_t to_int_checked(Interp& in, double d)
{
    if (std::isnan(d))
        in.raise("ValueError", "cannot convert float NaN to integer");
    if (std::isinf(d))
        in.raise("OverflowError", "cannot convert float infinity to integer");
    if (d >= 9.2233720368547758e18 || d < -9.2233720368547758e18)
        overflow(in);
    return static_cast<std::int64_t>(d);
}

Value math_module()
{
    Attrs a;
    auto unary = [&](const std::string& name, double (*fn)(double), bool check_domain = true) {
        a[name] = make_builtin(name, [name, fn, check_domain](Interp& in, Args& args, Kwargs&) -> Value {
            if (args.size() != 1)
                in.raise("TypeError", fmt::format("math.{}() takes exactly one argument ({} given)", name,
                                                  args.size()));
            double x = expect_float(in, args[0], "must be real number");
            double r = fn(x);
            if (check_domain && std::isnan(r) && !std::isnan(x))
                in.raise("ValueError", "math domain error");
            return Value(r);
        });
    };
    unary("sin", std::sin);
    unary("cos", std::cos);
    unary("tan", std::tan);
    unary("asin", std::asin);
    unary("acos", std::acos);
    unary("atan", std::atan);
    unary("sinh", std::sinh);
    unary("cosh", std::cosh);
    unary("tanh", std::tanh);
    unary("exp", std::exp);
    unary("fabs", std::fabs);
    unary("log10", std::log10);
    unary("log2", std::log2);
    unary("log1p", std::log1p);
    unary("expm1", std::expm1);
    a["sqrt"] = make_builtin("sqrt", [](Interp& in, Args& args, Kwargs&) -> Value {
        double x = expect_float(in, args.at(0), "must be real number");
        if (x < 0)
            in.raise("ValueError", "math domain error");
        return Value(std::sqrt(x));
    });
    a["log"] = make_builtin("log", [](Interp& in, Args& args, Kwargs&) -> Value {
        double x = expect_float(in, args.at(0), "must be real number");
        if (x <= 0)
            in.raise("ValueError", "math domain error");
        if (args.size() > 1) {
            double base = expect_float(in, args[1], "must be real number");
            if (base <= 0 || base == 1.0)
                in.raise(base == 1.0 ? "ZeroDivisionError" : "ValueError",
                         base == 1.0 ? "float division by zero" : "math domain error");
            return Value(std::log(x) / std::log(base));
        }
        return Value(std::log(x));
    });
    auto rounding = [&](const std::string& name, double (*fn)(double)) {
        a[name] = make_builtin(name, [fn](Interp& in, Args& args, Kwargs&) -> Value {
            const Value& v = args.at(0);
            if (!v.is<double>())
                return Value(expect_int(in, v, "must be real number"));
            return Value(to_int_checked(in, fn(v.as<double>())));
        });
    };
    rounding("floor", std::floor);
    rounding("ceil", std::ceil);
    rounding("trunc", std::trunc);
    a["pow"] = make_builtin("pow", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 2)
            in.raise("TypeError", "pow expected 2 arguments");
        return Value(std::pow(expect_float(in, args[0], "base"), expect_float(in, args[1], "exponent")));
    });
    a["atan2"] = make_builtin("atan2", [](Interp& in, Args& args, Kwargs&) -> Value {
        if (args.size() != 2)
            in.raise("TypeError", "atan2 expected 2 arguments");
        return Value(std::atan2(expect_float(in, args[0], "y"), expect_float(in, args[1], "x")));
    });
    a["hypot"] = make_builtin("hypot", [](Interp& in, Args& args, Kwargs&) -> Value {
        double acc = 0;
        for (auto& v : args) {
            double x = expect_float(in, v, "must be real number");
            acc = std::hypot(acc, x);
        }
        return Value(acc);
    });
    a["degrees"] = make_builtin("degrees", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(expect_float(in, args.at(0), "must be real number") * 180.0 / M_PI);
    });
    a["radians"] = make_builtin("radians", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(expect_float(in, args.at(0), "must be real number") * M_PI / 180.0);
    });
    a["isnan"] = make_builtin("isnan", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(std::isnan(expect_float(in, args.at(0), "must be real number")));
    });
    a["isinf"] = make_builtin("isinf", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(std::isinf(expect_float(in, args.at(0), "must be real number")));
    });
    a["isfinite"] = make_builtin("isfinite", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(std::isfinite(expect_float(in, args.at(0), "must be real number")));
    });
    a["isclose"] = make_builtin("isclose", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "isclose", args, kwargs);
        double x = expect_float(in, r.get(0, "a"), "a");
        double y = expect_float(in, r.get(1, "b"), "b");
        double rel = r.opt(99, "rel_tol") ? expect_float(in, *r.opt(99, "rel_tol"), "rel_tol") : 1e-9;
        double abs_tol = r.opt(99, "abs_tol") ? expect_float(in, *r.opt(99, "abs_tol"), "abs_tol") : 0.0;
        if (x == y)
            return Value(true);
        if (std::isinf(x) || std::isinf(y))
            return Value(false);
        double diff = std::fabs(x - y);
        return Value(diff <= std::fabs(rel * y) || diff <= std::fabs(rel * x) || diff <= abs_tol);
    });
    a["factorial"] = make_builtin("factorial", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::int64_t n = expect_int(in, args.at(0), "factorial() argument");
        if (n < 0)
            in.raise("ValueError", "factorial() not defined for negative values");
        std::int64_t r = 1;
        for (std::int64_t i = 2; i <= n; ++i)
            if (__builtin_mul_overflow(r, i, &r))
                overflow(in);
        return Value(r);
    });
    a["gcd"] = make_builtin("gcd", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::int64_t g = 0;
        for (auto& v : args)
            g = std::gcd(g, expect_int(in, v, "gcd() argument"));
        return Value(g);
    });
    a["lcm"] = make_builtin("lcm", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::int64_t l = 1;
        for (auto& v : args) {
            std::int64_t x = expect_int(in, v, "lcm() argument");
            if (x == 0)
                return Value(std::int64_t{0});
            std::int64_t g = std::gcd(l, x);
            if (__builtin_mul_overflow(l / g, x < 0 ? -x : x, &l))
                overflow(in);
        }
        return Value(l);
    });
    auto comb_perm = [&](const std::string& name, bool comb) {
        a[name] = make_builtin(name, [comb](Interp& in, Args& args, Kwargs&) -> Value {
            std::int64_t n = expect_int(in, args.at(0), "n");
            std::int64_t k = args.size() > 1 ? expect_int(in, args[1], "k") : n;
            if (n < 0 || k < 0)
                in.raise("ValueError", "n and k must be non-negative integers");
            if (k > n)
                return Value(std::int64_t{0});
            if (comb)
                k = std::min(k, n - k);
            __int128 r = 1;
            for (std::int64_t i = 0; i < k; ++i) {
                r *= (n - i);
                if (comb)
                    r /= (i + 1);
                if (r > INT64_MAX)
                    overflow(in);
            }
            return Value(static_cast<std::int64_t>(r));
        });
    };
    comb_perm("comb", true);
    comb_perm("perm", false);
    a["prod"] = make_builtin("prod", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "prod", args, kwargs);
        Value acc = r.opt(99, "start").value_or(Value(std::int64_t{1}));
        in.for_each(r.get(0, "iterable"), [&](const Value& v) {
            acc = in.binop(BinOpKind::mul, acc, v);
            return true;
        });
        return acc;
    });
    a["fsum"] = make_builtin("fsum", [](Interp& in, Args& args, Kwargs&) -> Value {
        long double acc = 0;
        in.for_each(args.at(0), [&](const Value& v) {
            acc += expect_float(in, v, "must be real number");
            return true;
        });
        return Value(static_cast<double>(acc));
    });
    a["pi"] = Value(M_PI);
    a["e"] = Value(M_E);
    a["tau"] = Value(2 * M_PI);
    a["inf"] = Value(HUGE_VAL);
    a["nan"] = Value(std::nan(""));
    return module("math", std::move(a));
}

// ---------------------------------------------------------------------------
// os and os.path
// ---------------------------------------------------------------------------

std::string path_arg(Interp& in, Args& args, std::size_t i = 0)
{
    if (i >= args.size())
        in.raise("TypeError", "missing path argument");
    return expect_str(in, args[i], "path");
}

std::string join_paths(const std::vector<std::string>& parts)
{
    std::string out;
    for (const auto& p : parts) {
        if (!p.empty() && p[0] == '/')
            out = p;
        else if (out.empty() || out.back() == '/')
            out += p;
        else
            out += "/" + p;
    }
    return out;
}

Value os_path_module()
{
    Attrs a;
    a["join"] = make_builtin("join", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::vector<std::string> parts;
        for (std::size_t i = 0; i < args.size(); ++i)
            parts.push_back(path_arg(in, args, i));
        return Value(join_paths(parts));
    });
    auto predicate = [&](const std::string& name, bool (*fn)(const fs::path&, std::error_code&)) {
        a[name] = make_builtin(name, [fn](Interp& in, Args& args, Kwargs&) -> Value {
            std::error_code ec;
            return Value(fn(path_arg(in, args), ec));
        });
    };
    predicate("exists", static_cast<bool (*)(const fs::path&, std::error_code&)>(fs::exists));
    predicate("isfile", static_cast<bool (*)(const fs::path&, std::error_code&)>(fs::is_regular_file));
    predicate("isdir", static_cast<bool (*)(const fs::path&, std::error_code&)>(fs::is_directory));
    a["basename"] = make_builtin("basename", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        auto slash = p.rfind('/');
        return Value(slash == std::string::npos ? p : p.substr(slash + 1));
    });
    a["dirname"] = make_builtin("dirname", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        auto slash = p.rfind('/');
        if (slash == std::string::npos)
            return Value("");
        std::string head = p.substr(0, slash + 1);
        while (head.size() > 1 && head.back() == '/')
            head.pop_back();
        return Value(head);
    });
    a["split"] = make_builtin("split", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        auto slash = p.rfind('/');
        if (slash == std::string::npos)
            return make_tuple({Value(""), Value(p)});
        std::string head = p.substr(0, slash + 1);
        while (head.size() > 1 && head.back() == '/')
            head.pop_back();
        return make_tuple({Value(head), Value(p.substr(slash + 1))});
    });
    a["splitext"] = make_builtin("splitext", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        auto slash = p.rfind('/');
        std::size_t base = slash == std::string::npos ? 0 : slash + 1;
        auto dot = p.rfind('.');
        std::size_t first = p.find_first_not_of('.', base);
        if (dot == std::string::npos || dot < base || first == std::string::npos || dot < first)
            return make_tuple({Value(p), Value("")});
        return make_tuple({Value(p.substr(0, dot)), Value(p.substr(dot))});
    });
    a["getsize"] = make_builtin("getsize", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        std::error_code ec;
        auto n = fs::file_size(p, ec);
        if (ec)
            in.raise("FileNotFoundError", fmt::format("[Errno 2] No such file or directory: {}", repr(Value(p))));
        return Value(static_cast<std::int64_t>(n));
    });
    a["abspath"] = make_builtin("abspath", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::error_code ec;
        std::string s = fs::absolute(path_arg(in, args), ec).lexically_normal().string();
        if (s.size() > 1 && s.back() == '/')
            s.pop_back();
        return Value(s);
    });
    a["normpath"] = make_builtin("normpath", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string s = fs::path(path_arg(in, args)).lexically_normal().string();
        if (s.size() > 1 && s.back() == '/')
            s.pop_back();
        return Value(s.empty() ? "." : s);
    });
    a["isabs"] = make_builtin("isabs", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        return Value(!p.empty() && p[0] == '/');
    });
    a["sep"] = Value("/");
    return module("os.path", std::move(a));
}

Value os_module()
{
    Attrs a;
    a["path"] = os_path_module();
    a["sep"] = Value("/");
    a["linesep"] = Value("\n");
    // The mock executor never exposes the host environment.
    a["environ"] = make_dict();
    a["getenv"] = make_builtin("getenv", [](Interp&, Args& args, Kwargs&) -> Value {
        return args.size() > 1 ? args[1] : none;
    });
    a["getcwd"] = make_builtin("getcwd", [](Interp&, Args&, Kwargs&) -> Value {
        return Value(fs::current_path().string());
    });
    a["listdir"] = make_builtin("listdir", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = args.empty() ? "." : path_arg(in, args);
        std::error_code ec;
        std::vector<std::string> names;
        for (fs::directory_iterator it(p, ec), end; !ec && it != end; it.increment(ec))
            names.push_back(it->path().filename().string());
        if (ec)
            in.raise("FileNotFoundError", fmt::format("[Errno 2] No such file or directory: {}", repr(Value(p))));
        std::sort(names.begin(), names.end());
        std::vector<Value> out(names.begin(), names.end());
        return make_list(std::move(out));
    });
    a["makedirs"] = make_builtin("makedirs", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "makedirs", args, kwargs);
        std::string p = expect_str(in, r.get(0, "name"), "path");
        auto exist_ok = r.opt(2, "exist_ok");
        std::error_code ec;
        if (fs::exists(p, ec)) {
            if (exist_ok && truthy(*exist_ok))
                return none;
            in.raise("FileExistsError", fmt::format("[Errno 17] File exists: {}", repr(Value(p))));
        }
        fs::create_directories(p, ec);
        if (ec)
            in.raise("OSError", ec.message());
        return none;
    });
    a["mkdir"] = make_builtin("mkdir", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        std::error_code ec;
        if (!fs::create_directory(p, ec))
            in.raise(ec ? "FileNotFoundError" : "FileExistsError",
                     fmt::format("[Errno {}] {}: {}", ec ? 2 : 17, ec ? "No such file or directory" : "File exists",
                                 repr(Value(p))));
        return none;
    });
    auto remover = [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string p = path_arg(in, args);
        std::error_code ec;
        if (!fs::is_regular_file(p, ec) || !fs::remove(p, ec))
            in.raise("FileNotFoundError", fmt::format("[Errno 2] No such file or directory: {}", repr(Value(p))));
        return none;
    };
    a["remove"] = make_builtin("remove", remover);
    a["unlink"] = make_builtin("unlink", remover);
    a["rename"] = make_builtin("rename", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::error_code ec;
        fs::rename(path_arg(in, args, 0), path_arg(in, args, 1), ec);
        if (ec)
            in.raise("OSError", ec.message());
        return none;
    });
    a["_exit"] = make_builtin("_exit", [](Interp& in, Args& args, Kwargs&) -> Value {
        throw CrashSignal{static_cast<int>(args.empty() ? 0 : expect_int(in, args[0], "status"))};
    });
    return module("os", std::move(a));
}

// ---------------------------------------------------------------------------
// json
// ---------------------------------------------------------------------------

void append_json_string(std::string& out, const std::string& s, bool ensure_ascii)
{
    out += '"';
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto c = static_cast<unsigned char>(s[i]);
        switch (c) {
        case '"': out += "\\\""; continue;
        case '\\': out += "\\\\"; continue;
        case '\n': out += "\\n"; continue;
        case '\r': out += "\\r"; continue;
        case '\t': out += "\\t"; continue;
        case '\b': out += "\\b"; continue;
        case '\f': out += "\\f"; continue;
        default: break;
        }
        if (c < 0x20) {
            out += fmt::format("\\u{:04x}", c);
            continue;
        }
        if (c < 0x80 || !ensure_ascii) {
            out += static_cast<char>(c);
            continue;
        }
        int extra = c >= 0xF0 ? 3 : c >= 0xE0 ? 2 : 1;
        std::uint32_t cp = c & (0x3F >> extra);
        for (int k = 0; k < extra && i + 1 < s.size(); ++k)
            cp = (cp << 6) | (static_cast<unsigned char>(s[++i]) & 0x3F);
        if (cp >= 0x10000) {
            cp -= 0x10000;
            out += fmt::format("\\u{:04x}\\u{:04x}", 0xD800 + (cp >> 10), 0xDC00 + (cp & 0x3FF));
        } else {
            out += fmt::format("\\u{:04x}", cp);
        }
    }
    out += '"';
}

struct DumpOptions {
    std::optional<std::string> indent;
    bool sort_keys = false;
    bool ensure_ascii = true;
    std::string item_sep = ", ";
    std::string key_sep = ": ";
};

void dump_value(Interp& in, std::string& out, const Value& v, const DumpOptions& opt, int depth)
{
    if (depth > 500)
        in.raise("RecursionError", "maximum recursion depth exceeded while encoding a JSON object");
    auto newline = [&](int d) {
        if (opt.indent) {
            out += '\n';
            for (int i = 0; i < d; ++i)
                out += *opt.indent;
        }
    };
    if (v.is_none()) {
        out += "null";
    } else if (v.is<bool>()) {
        out += v.as<bool>() ? "true" : "false";
    } else if (v.is<std::int64_t>()) {
        out += std::to_string(v.as<std::int64_t>());
    } else if (v.is<double>()) {
        double d = v.as<double>();
        out += std::isnan(d) ? "NaN" : std::isinf(d) ? (d > 0 ? "Infinity" : "-Infinity") : format_float(d);
    } else if (v.is<std::string>()) {
        append_json_string(out, v.as<std::string>(), opt.ensure_ascii);
    } else if (v.is<std::shared_ptr<ListObj>>() || v.is<std::shared_ptr<TupleObj>>()) {
        const auto& items = v.is<std::shared_ptr<ListObj>>() ? v.as<std::shared_ptr<ListObj>>()->items
                                                             : v.as<std::shared_ptr<TupleObj>>()->items;
        if (items.empty()) {
            out += "[]";
            return;
        }
        out += '[';
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i)
                out += opt.item_sep;
            newline(depth + 1);
            dump_value(in, out, items[i], opt, depth + 1);
        }
        newline(depth);
        out += ']';
    } else if (v.is<std::shared_ptr<DictObj>>() && !v.as<std::shared_ptr<DictObj>>()->is_set) {
        auto& d = *v.as<std::shared_ptr<DictObj>>();
        if (d.entries.empty()) {
            out += "{}";
            return;
        }
        std::vector<std::pair<std::string, const Value*>> entries;
        for (auto& [k, val] : d.entries) {
            std::string key;
            if (k.is<std::string>())
                key = k.as<std::string>();
            else if (k.is<bool>())
                key = k.as<bool>() ? "true" : "false";
            else if (k.is_none())
                key = "null";
            else if (k.is_number())
                key = repr(k);
            else
                in.raise("TypeError",
                         fmt::format("keys must be str, int, float, bool or None, not {}", type_name(k)));
            entries.emplace_back(key, &val);
        }
        if (opt.sort_keys)
            std::stable_sort(entries.begin(), entries.end(),
                             [](const auto& x, const auto& y) { return x.first < y.first; });
        out += '{';
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (i)
                out += opt.item_sep;
            newline(depth + 1);
            append_json_string(out, entries[i].first, opt.ensure_ascii);
            out += opt.key_sep;
            dump_value(in, out, *entries[i].second, opt, depth + 1);
        }
        newline(depth);
        out += '}';
    } else {
        in.raise("TypeError", fmt::format("Object of type {} is not JSON serializable", type_name(v)));
    }
}

std::string dumps(Interp& in, const Value& v, ArgReader& r, std::size_t first_opt)
{
    DumpOptions opt;
    if (auto ind = r.opt(first_opt + 99, "indent"); ind && !ind->is_none()) {
        if (ind->is<std::string>())
            opt.indent = ind->as<std::string>();
        else
            opt.indent = std::string(static_cast<std::size_t>(std::max<std::int64_t>(0, expect_int(in, *ind, "indent"))), ' ');
        opt.item_sep = ",";
    }
    if (auto sk = r.opt(first_opt + 99, "sort_keys"))
        opt.sort_keys = truthy(*sk);
    if (auto ea = r.opt(first_opt + 99, "ensure_ascii"))
        opt.ensure_ascii = truthy(*ea);
    if (auto seps = r.opt(first_opt + 99, "separators"); seps && !seps->is_none()) {
        auto parts = in.to_vector(*seps);
        if (parts.size() != 2)
            in.raise("ValueError", "separators must be a pair");
        opt.item_sep = expect_str(in, parts[0], "separator");
        opt.key_sep = expect_str(in, parts[1], "separator");
    }
    std::string out;
    dump_value(in, out, v, opt, 0);
    return out;
}

Value json_to_value(Interp& in, const nlohmann::ordered_json& j)
{
    switch (j.type()) {
    case nlohmann::ordered_json::value_t::null: return none;
    case nlohmann::ordered_json::value_t::boolean: return Value(j.get<bool>());
    case nlohmann::ordered_json::value_t::number_integer: return Value(j.get<std::int64_t>());
    case nlohmann::ordered_json::value_t::number_unsigned: {
        auto u = j.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(INT64_MAX))
            overflow(in);
        return Value(static_cast<std::int64_t>(u));
    }
    case nlohmann::ordered_json::value_t::number_float: return Value(j.get<double>());
    case nlohmann::ordered_json::value_t::string: return Value(j.get<std::string>());
    case nlohmann::ordered_json::value_t::array: {
        std::vector<Value> items;
        for (const auto& x : j)
            items.push_back(json_to_value(in, x));
        return make_list(std::move(items));
    }
    case nlohmann::ordered_json::value_t::object: {
        Value out = make_dict();
        for (const auto& [k, x] : j.items())
            out.as<std::shared_ptr<DictObj>>()->set(Value(k), json_to_value(in, x));
        return out;
    }
    default: in.raise("JSONDecodeError", "unsupported JSON value");
    }
}

Value loads(Interp& in, const std::string& text)
{
    try {
        return json_to_value(in, nlohmann::ordered_json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        std::string msg = e.what();
        auto colon = msg.find("parse error");
        in.raise("JSONDecodeError", colon == std::string::npos ? msg : msg.substr(colon));
    }
}

Value json_module()
{
    Attrs a;
    a["dumps"] = make_builtin("dumps", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "dumps", args, kwargs);
        r.at_most(1);
        return Value(dumps(in, r.get(0, "obj"), r, 1));
    });
    a["dump"] = make_builtin("dump", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "dump", args, kwargs);
        r.at_most(2);
        std::string text = dumps(in, r.get(0, "obj"), r, 2);
        in.call(in.getattr(r.get(1, "fp"), "write"), {Value(text)});
        return none;
    });
    a["loads"] = make_builtin("loads", [](Interp& in, Args& args, Kwargs&) -> Value {
        return loads(in, expect_str(in, args.at(0), "the JSON object"));
    });
    a["load"] = make_builtin("load", [](Interp& in, Args& args, Kwargs&) -> Value {
        Value text = in.call(in.getattr(args.at(0), "read"), {});
        return loads(in, expect_str(in, text, "the JSON object"));
    });
    a["JSONDecodeError"] = exception_type("JSONDecodeError");
    return module("json", std::move(a));
}

// ---------------------------------------------------------------------------
// re (backed by std::regex with Python syntax translated)
// ---------------------------------------------------------------------------

constexpr std::int64_t flag_ignorecase = 2;
constexpr std::int64_t flag_multiline = 8;
constexpr std::int64_t flag_dotall = 16;

struct Pattern {
    std::string source;
    std::regex re;
    std::map<std::string, std::size_t> names;
    std::size_t groups = 0;
};

Pattern compile_pattern(Interp& in, const std::string& py, std::int64_t flags)
{
    Pattern p;
    p.source = py;
    std::string out;
    std::size_t i = 0;
    // Leading inline flags such as (?i) or (?ms).
    while (py.compare(i, 2, "(?") == 0 && i + 2 < py.size() && std::isalpha(static_cast<unsigned char>(py[i + 2]))) {
        std::size_t j = i + 2;
        while (j < py.size() && std::isalpha(static_cast<unsigned char>(py[j]))) {
            char f = py[j++];
            flags |= f == 'i' ? flag_ignorecase : f == 'm' ? flag_multiline : f == 's' ? flag_dotall : 0;
        }
        if (j >= py.size() || py[j] != ')')
            break;
        i = j + 1;
    }
    bool in_class = false;
    for (; i < py.size(); ++i) {
        char c = py[i];
        if (c == '\\' && i + 1 < py.size()) {
            char n = py[i + 1];
            ++i;
            if (!in_class && n == 'A')
                out += '^';
            else if (!in_class && (n == 'Z' || n == 'z'))
                out += '$';
            else
                out += std::string{'\\', n};
            continue;
        }
        if (in_class) {
            if (c == ']')
                in_class = false;
            out += c;
            continue;
        }
        if (c == '[') {
            in_class = true;
            out += c;
            if (i + 1 < py.size() && py[i + 1] == '^')
                out += py[++i];
            if (i + 1 < py.size() && py[i + 1] == ']') {
                out += "\\]";
                ++i;
            }
            continue;
        }
        if (c == '.' && (flags & flag_dotall)) {
            out += "[\\s\\S]";
            continue;
        }
        if (c == '(') {
            if (py.compare(i, 4, "(?P<") == 0) {
                auto close = py.find('>', i);
                if (close == std::string::npos)
                    in.raise("error", "missing >, unterminated name");
                p.names[py.substr(i + 4, close - i - 4)] = ++p.groups;
                out += '(';
                i = close;
                continue;
            }
            if (py.compare(i, 4, "(?P=") == 0) {
                auto close = py.find(')', i);
                auto it = p.names.find(py.substr(i + 4, close - i - 4));
                if (close == std::string::npos || it == p.names.end())
                    in.raise("error", "unknown group name");
                out += "\\" + std::to_string(it->second);
                i = close;
                continue;
            }
            if (py.compare(i, 4, "(?<=") == 0 || py.compare(i, 4, "(?<!") == 0)
                in.raise("error", "look-behind assertions are not supported by this executor");
            if (i + 1 < py.size() && py[i + 1] != '?')
                ++p.groups;
            out += c;
            continue;
        }
        out += c;
    }
    auto syntax = std::regex::ECMAScript;
    if (flags & flag_ignorecase)
        syntax |= std::regex::icase;
    if (flags & flag_multiline)
        syntax |= std::regex::multiline;
    try {
        p.re = std::regex(out, syntax);
    } catch (const std::regex_error& e) {
        in.raise("error", fmt::format("invalid pattern {}: {}", repr(Value(py)), e.what()));
    }
    return p;
}

Value make_match(const Pattern& p, const std::smatch& m, const std::string& subject)
{
    auto obj = std::make_shared<MatchObj>();
    auto base = static_cast<std::int64_t>(m[0].first - subject.begin());
    for (std::size_t g = 0; g < m.size(); ++g) {
        if (m[g].matched) {
            obj->groups.emplace_back(m[g].str());
            obj->starts.push_back(static_cast<std::int64_t>(m[g].first - subject.begin()));
        } else {
            obj->groups.emplace_back(std::nullopt);
            obj->starts.push_back(-1);
        }
    }
    obj->names = p.names;
    obj->start = base;
    obj->end = base + static_cast<std::int64_t>(m[0].length());
    return Value(obj);
}

// Expands \1, \g<name> and escapes in a Python replacement template.
std::string expand_template(Interp& in, const Pattern& p, const std::string& repl, const std::smatch& m)
{
    std::string out;
    auto group = [&](std::size_t g) {
        if (g >= m.size())
            in.raise("error", fmt::format("invalid group reference {}", g));
        if (m[g].matched)
            out += m[g].str();
    };
    for (std::size_t i = 0; i < repl.size(); ++i) {
        char c = repl[i];
        if (c != '\\' || i + 1 >= repl.size()) {
            out += c;
            continue;
        }
        char n = repl[++i];
        if (std::isdigit(static_cast<unsigned char>(n))) {
            std::size_t g = static_cast<std::size_t>(n - '0');
            if (i + 1 < repl.size() && std::isdigit(static_cast<unsigned char>(repl[i + 1])))
                g = g * 10 + static_cast<std::size_t>(repl[++i] - '0');
            group(g);
        } else if (n == 'g' && i + 1 < repl.size() && repl[i + 1] == '<') {
            auto close = repl.find('>', i);
            if (close == std::string::npos)
                in.raise("error", "missing >, unterminated name");
            std::string name = repl.substr(i + 2, close - i - 2);
            if (!name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
                group(std::stoul(name));
            } else {
                auto it = p.names.find(name);
                if (it == p.names.end())
                    in.raise("IndexError", fmt::format("unknown group name '{}'", name));
                group(it->second);
            }
            i = close;
        } else if (n == 'n') {
            out += '\n';
        } else if (n == 't') {
            out += '\t';
        } else if (n == '\\') {
            out += '\\';
        } else {
            out += std::string{'\\', n};
        }
    }
    return out;
}

using PatternPtr = std::shared_ptr<Pattern>;

Value re_search(Interp& in, const PatternPtr& p, const std::string& s, int mode)
{
    std::smatch m;
    bool ok = false;
    try {
        if (mode == 0)
            ok = std::regex_search(s, m, p->re);
        else if (mode == 1)
            ok = std::regex_search(s, m, p->re, std::regex_constants::match_continuous);
        else
            ok = std::regex_match(s, m, p->re);
    } catch (const std::regex_error& e) {
        in.raise("error", e.what());
    }
    return ok ? make_match(*p, m, s) : none;
}

template <typename Fn>
void each_match(Interp& in, const PatternPtr& p, const std::string& s, Fn&& fn)
{
    try {
        for (std::sregex_iterator it(s.begin(), s.end(), p->re), end; it != end; ++it) {
            in.check_deadline();
            if (!fn(*it))
                break;
        }
    } catch (const std::regex_error& e) {
        in.raise("error", e.what());
    }
}

Value re_findall(Interp& in, const PatternPtr& p, const std::string& s)
{
    std::vector<Value> out;
    each_match(in, p, s, [&](const std::smatch& m) {
        if (m.size() == 1) {
            out.emplace_back(m[0].str());
        } else if (m.size() == 2) {
            out.emplace_back(m[1].str());
        } else {
            std::vector<Value> groups;
            for (std::size_t g = 1; g < m.size(); ++g)
                groups.emplace_back(m[g].str());
            out.push_back(make_tuple(std::move(groups)));
        }
        return true;
    });
    return make_list(std::move(out));
}

Value re_finditer(Interp& in, const PatternPtr& p, const std::string& s)
{
    std::vector<Value> out;
    each_match(in, p, s, [&](const std::smatch& m) {
        out.push_back(make_match(*p, m, s));
        return true;
    });
    return make_list(std::move(out));
}

Value re_sub(Interp& in, const PatternPtr& p, const Value& repl, const std::string& s, std::int64_t count)
{
    std::string out;
    auto last = s.begin();
    std::int64_t done = 0;
    each_match(in, p, s, [&](const std::smatch& m) {
        if (count > 0 && done >= count)
            return false;
        out.append(last, m[0].first);
        if (repl.is<std::string>())
            out += expand_template(in, *p, repl.as<std::string>(), m);
        else
            out += expect_str(in, in.call(repl, {make_match(*p, m, s)}), "replacement");
        last = m[0].second;
        ++done;
        return true;
    });
    out.append(last, s.end());
    return Value(out);
}

Value re_split(Interp& in, const PatternPtr& p, const std::string& s, std::int64_t maxsplit)
{
    std::vector<Value> out;
    auto last = s.begin();
    std::int64_t done = 0;
    each_match(in, p, s, [&](const std::smatch& m) {
        if (maxsplit > 0 && done >= maxsplit)
            return false;
        if (m[0].length() == 0 && m[0].first == s.begin())
            return true;
        out.emplace_back(std::string(last, m[0].first));
        for (std::size_t g = 1; g < m.size(); ++g)
            out.push_back(m[g].matched ? Value(m[g].str()) : none);
        last = m[0].second;
        ++done;
        return true;
    });
    out.emplace_back(std::string(last, s.end()));
    return make_list(std::move(out));
}

PatternPtr pattern_from(Interp& in, const Value& v, std::int64_t flags)
{
    if (v.is<std::shared_ptr<ModuleObj>>()) {
        auto m = v.as<std::shared_ptr<ModuleObj>>();
        auto it = m->attrs.find("pattern");
        if (m->name == "re.Pattern" && it != m->attrs.end()) {
            auto fl = m->attrs.find("flags");
            return std::make_shared<Pattern>(
                compile_pattern(in, it->second.as<std::string>(), fl->second.as<std::int64_t>()));
        }
    }
    return std::make_shared<Pattern>(compile_pattern(in, expect_str(in, v, "pattern"), flags));
}

std::int64_t flags_arg(Interp& in, const ArgReader& r, std::size_t pos)
{
    auto f = r.opt(pos, "flags");
    return f ? expect_int(in, *f, "flags") : 0;
}

Value compiled(const PatternPtr& p, std::int64_t flags)
{
    Attrs a;
    a["pattern"] = Value(p->source);
    a["flags"] = Value(flags);
    a["groups"] = Value(static_cast<std::int64_t>(p->groups));
    for (auto [name, mode] : {std::pair{"search", 0}, std::pair{"match", 1}, std::pair{"fullmatch", 2}}) {
        a[name] = make_builtin(name, [p, mode = mode](Interp& in, Args& args, Kwargs&) -> Value {
            return re_search(in, p, expect_str(in, args.at(0), "string"), mode);
        });
    }
    a["findall"] = make_builtin("findall", [p](Interp& in, Args& args, Kwargs&) -> Value {
        return re_findall(in, p, expect_str(in, args.at(0), "string"));
    });
    a["finditer"] = make_builtin("finditer", [p](Interp& in, Args& args, Kwargs&) -> Value {
        return re_finditer(in, p, expect_str(in, args.at(0), "string"));
    });
    a["sub"] = make_builtin("sub", [p](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "sub", args, kwargs);
        auto count = r.opt(2, "count");
        return re_sub(in, p, r.get(0, "repl"), expect_str(in, r.get(1, "string"), "string"),
                      count ? expect_int(in, *count, "count") : 0);
    });
    a["split"] = make_builtin("split", [p](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "split", args, kwargs);
        auto ms = r.opt(1, "maxsplit");
        return re_split(in, p, expect_str(in, r.get(0, "string"), "string"), ms ? expect_int(in, *ms, "maxsplit") : 0);
    });
    return module("re.Pattern", std::move(a));
}

Value re_module()
{
    Attrs a;
    for (auto [name, mode] : {std::pair{"search", 0}, std::pair{"match", 1}, std::pair{"fullmatch", 2}}) {
        a[name] = make_builtin(name, [name = std::string(name), mode = mode](Interp& in, Args& args, Kwargs& kwargs) -> Value {
            ArgReader r(in, name, args, kwargs);
            auto p = pattern_from(in, r.get(0, "pattern"), flags_arg(in, r, 2));
            return re_search(in, p, expect_str(in, r.get(1, "string"), "string"), mode);
        });
    }
    a["findall"] = make_builtin("findall", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "findall", args, kwargs);
        auto p = pattern_from(in, r.get(0, "pattern"), flags_arg(in, r, 2));
        return re_findall(in, p, expect_str(in, r.get(1, "string"), "string"));
    });
    a["finditer"] = make_builtin("finditer", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "finditer", args, kwargs);
        auto p = pattern_from(in, r.get(0, "pattern"), flags_arg(in, r, 2));
        return re_finditer(in, p, expect_str(in, r.get(1, "string"), "string"));
    });
    a["sub"] = make_builtin("sub", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "sub", args, kwargs);
        auto p = pattern_from(in, r.get(0, "pattern"), flags_arg(in, r, 4));
        auto count = r.opt(3, "count");
        return re_sub(in, p, r.get(1, "repl"), expect_str(in, r.get(2, "string"), "string"),
                      count ? expect_int(in, *count, "count") : 0);
    });
    a["split"] = make_builtin("split", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "split", args, kwargs);
        auto p = pattern_from(in, r.get(0, "pattern"), flags_arg(in, r, 3));
        auto ms = r.opt(2, "maxsplit");
        return re_split(in, p, expect_str(in, r.get(1, "string"), "string"), ms ? expect_int(in, *ms, "maxsplit") : 0);
    });
    a["compile"] = make_builtin("compile", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "compile", args, kwargs);
        std::int64_t flags = flags_arg(in, r, 1);
        return compiled(pattern_from(in, r.get(0, "pattern"), flags), flags);
    });
    a["escape"] = make_builtin("escape", [](Interp& in, Args& args, Kwargs&) -> Value {
        std::string s = expect_str(in, args.at(0), "pattern");
        std::string out;
        for (char c : s) {
            if (std::string("()[]{}?*+-|^$\\.&~# \t\n\r\v\f").find(c) != std::string::npos)
                out += '\\';
            out += c;
        }
        return Value(out);
    });
    a["IGNORECASE"] = a["I"] = Value(flag_ignorecase);
    a["MULTILINE"] = a["M"] = Value(flag_multiline);
    a["DOTALL"] = a["S"] = Value(flag_dotall);
    a["error"] = exception_type("error");
    return module("re", std::move(a));
}

// ---------------------------------------------------------------------------
// csv
// ---------------------------------------------------------------------------

std::string csv_input(Interp& in, const Value& source)
{
    if (source.is<std::shared_ptr<FileObj>>()) {
        auto f = source.as<std::shared_ptr<FileObj>>();
        if (f->closed)
            in.raise("ValueError", "I/O operation on closed file.");
        std::string rest = f->content.substr(f->pos);
        f->pos = f->content.size();
        return rest;
    }
    std::string text;
    in.for_each(source, [&](const Value& v) {
        std::string line = expect_str(in, v, "csv line");
        text += line;
        if (line.empty() || line.back() != '\n')
            text += '\n';
        return true;
    });
    return text;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text, char delim, char quote)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == quote) {
                if (i + 1 < text.size() && text[i + 1] == quote) {
                    field += quote;
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == quote && field.empty()) {
            quoted = true;
            any = true;
        } else if (c == delim) {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            if (any || !field.empty())
                row.push_back(std::move(field));
            rows.push_back(std::move(row));
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

char single_char(Interp& in, const std::optional<Value>& v, char dflt, const char* what)
{
    if (!v)
        return dflt;
    std::string s = expect_str(in, *v, what);
    if (s.size() != 1)
        in.raise("TypeError", fmt::format("\"{}\" must be a 1-character string", what));
    return s[0];
}

std::string csv_line(Interp& in, const Value& row, char delim, char quote)
{
    std::string line;
    std::size_t i = 0;
    in.for_each(row, [&](const Value& v) {
        std::string field = v.is_none() ? "" : str(v);
        if (i++)
            line += delim;
        if (field.find_first_of(std::string{delim, quote, '\n', '\r'}) != std::string::npos) {
            std::string escaped;
            for (char c : field) {
                if (c == quote)
                    escaped += quote;
                escaped += c;
            }
            field = quote + escaped + quote;
        }
        line += field;
        return true;
    });
    return line + "\r\n";
}

Value csv_module()
{
    Attrs a;
    a["reader"] = make_builtin("reader", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "reader", args, kwargs);
        char delim = single_char(in, r.opt(99, "delimiter"), ',', "delimiter");
        char quote = single_char(in, r.opt(99, "quotechar"), '"', "quotechar");
        std::vector<Value> rows;
        for (auto& row : parse_csv(csv_input(in, r.get(0, "csvfile")), delim, quote)) {
            std::vector<Value> cells(row.begin(), row.end());
            rows.push_back(make_list(std::move(cells)));
        }
        return make_list(std::move(rows));
    });
    a["DictReader"] = make_builtin("DictReader", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "DictReader", args, kwargs);
        char delim = single_char(in, r.opt(99, "delimiter"), ',', "delimiter");
        char quote = single_char(in, r.opt(99, "quotechar"), '"', "quotechar");
        auto rows = parse_csv(csv_input(in, r.get(0, "f")), delim, quote);
        std::vector<std::string> header;
        std::size_t first = 0;
        if (auto names = r.opt(1, "fieldnames"); names && !names->is_none()) {
            for (auto& v : in.to_vector(*names))
                header.push_back(str(v));
        } else if (!rows.empty()) {
            header = rows[0];
            first = 1;
        }
        std::vector<Value> out;
        for (std::size_t i = first; i < rows.size(); ++i) {
            if (rows[i].empty())
                continue;
            Value d = make_dict();
            for (std::size_t c = 0; c < header.size(); ++c)
                d.as<std::shared_ptr<DictObj>>()->set(Value(header[c]),
                                                      c < rows[i].size() ? Value(rows[i][c]) : none);
            out.push_back(d);
        }
        return make_list(std::move(out));
    });
    a["writer"] = make_builtin("writer", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "writer", args, kwargs);
        Value target = r.get(0, "csvfile");
        char delim = single_char(in, r.opt(99, "delimiter"), ',', "delimiter");
        char quote = single_char(in, r.opt(99, "quotechar"), '"', "quotechar");
        Value write = in.getattr(target, "write");
        Attrs w;
        w["writerow"] = make_builtin("writerow", [write, delim, quote](Interp& in, Args& args, Kwargs&) -> Value {
            return in.call(write, {Value(csv_line(in, args.at(0), delim, quote))});
        });
        w["writerows"] = make_builtin("writerows", [write, delim, quote](Interp& in, Args& args, Kwargs&) -> Value {
            in.for_each(args.at(0), [&](const Value& row) {
                in.call(write, {Value(csv_line(in, row, delim, quote))});
                return true;
            });
            return none;
        });
        return module("csv.writer", std::move(w));
    });
    return module("csv", std::move(a));
}

// ---------------------------------------------------------------------------
// string, time, statistics
// ---------------------------------------------------------------------------

Value string_module()
{
    Attrs a;
    a["ascii_lowercase"] = Value("abcdefghijklmnopqrstuvwxyz");
    a["ascii_uppercase"] = Value("ABCDEFGHIJKLMNOPQRSTUVWXYZ");
    a["ascii_letters"] = Value("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ");
    a["digits"] = Value("0123456789");
    a["hexdigits"] = Value("0123456789abcdefABCDEF");
    a["punctuation"] = Value("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~");
    a["whitespace"] = Value(" \t\n\r\x0b\x0c");
    return module("string", std::move(a));
}

Value time_module()
{
    Attrs a;
    a["time"] = make_builtin("time", [](Interp&, Args&, Kwargs&) -> Value {
        auto now = std::chrono::system_clock::now().time_since_epoch();
        return Value(std::chrono::duration<double>(now).count());
    });
    auto mono = [](Interp&, Args&, Kwargs&) -> Value {
        auto now = std::chrono::steady_clock::now().time_since_epoch();
        return Value(std::chrono::duration<double>(now).count());
    };
    a["monotonic"] = make_builtin("monotonic", mono);
    a["perf_counter"] = make_builtin("perf_counter", mono);
    a["sleep"] = make_builtin("sleep", [](Interp& in, Args& args, Kwargs&) -> Value {
        double secs = expect_float(in, args.at(0), "sleep length");
        if (secs < 0)
            in.raise("ValueError", "sleep length must be non-negative");
        auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(secs);
        while (std::chrono::steady_clock::now() < until) {
            in.check_deadline(true);
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(until - std::chrono::steady_clock::now());
            std::this_thread::sleep_for(std::min(left + std::chrono::milliseconds(1), std::chrono::milliseconds(10)));
        }
        in.check_deadline(true);
        return none;
    });
    return module("time", std::move(a));
}

std::vector<double> numbers(Interp& in, const Value& data, const char* fn, std::size_t min_count)
{
    std::vector<double> xs;
    in.for_each(data, [&](const Value& v) {
        xs.push_back(expect_float(in, v, "data item"));
        return true;
    });
    if (xs.size() < min_count)
        in.raise("StatisticsError", min_count > 1 ? fmt::format("{} requires at least two data points", fn)
                                                  : fmt::format("{} requires at least one data point", fn));
    return xs;
}

double variance_of(const std::vector<double>& xs, bool sample)
{
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - (sample ? 1 : 0));
}

Value statistics_module()
{
    Attrs a;
    a["mean"] = make_builtin("mean", [](Interp& in, Args& args, Kwargs&) -> Value {
        auto items = in.to_vector(args.at(0));
        if (items.empty())
            in.raise("StatisticsError", "mean requires at least one data point");
        Value total = Value(std::int64_t{0});
        for (auto& v : items)
            total = in.binop(BinOpKind::add, total, v);
        auto n = static_cast<std::int64_t>(items.size());
        if (total.is<std::int64_t>() && total.as<std::int64_t>() % n == 0)
            return Value(total.as<std::int64_t>() / n);
        return in.binop(BinOpKind::div, total, Value(n));
    });
    a["fmean"] = make_builtin("fmean", [](Interp& in, Args& args, Kwargs&) -> Value {
        auto xs = numbers(in, args.at(0), "fmean", 1);
        return Value(std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size()));
    });
    a["median"] = make_builtin("median", [](Interp& in, Args& args, Kwargs&) -> Value {
        auto items = in.to_vector(args.at(0));
        if (items.empty())
            in.raise("StatisticsError", "no median for empty data");
        std::stable_sort(items.begin(), items.end(), [&](const Value& x, const Value& y) { return in.less(x, y); });
        std::size_t n = items.size();
        if (n % 2)
            return items[n / 2];
        return in.binop(BinOpKind::div, in.binop(BinOpKind::add, items[n / 2 - 1], items[n / 2]), Value(std::int64_t{2}));
    });
    a["mode"] = make_builtin("mode", [](Interp& in, Args& args, Kwargs&) -> Value {
        auto items = in.to_vector(args.at(0));
        if (items.empty())
            in.raise("StatisticsError", "no mode for empty data");
        Value counts = make_dict();
        auto& d = *counts.as<std::shared_ptr<DictObj>>();
        for (auto& v : items) {
            Value* c = d.find(v);
            d.set(v, Value((c ? c->as<std::int64_t>() : 0) + 1));
        }
        const Value* best = nullptr;
        std::int64_t best_count = 0;
        for (auto& [k, c] : d.entries)
            if (c.as<std::int64_t>() > best_count) {
                best = &k;
                best_count = c.as<std::int64_t>();
            }
        return *best;
    });
    a["variance"] = make_builtin("variance", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(variance_of(numbers(in, args.at(0), "variance", 2), true));
    });
    a["pvariance"] = make_builtin("pvariance", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(variance_of(numbers(in, args.at(0), "pvariance", 1), false));
    });
    a["stdev"] = make_builtin("stdev", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(std::sqrt(variance_of(numbers(in, args.at(0), "stdev", 2), true)));
    });
    a["pstdev"] = make_builtin("pstdev", [](Interp& in, Args& args, Kwargs&) -> Value {
        return Value(std::sqrt(variance_of(numbers(in, args.at(0), "pstdev", 1), false)));
    });
    a["StatisticsError"] = exception_type("StatisticsError");
    return module("statistics", std::move(a));
}

// ---------------------------------------------------------------------------
// urllib.request
// ---------------------------------------------------------------------------

std::string fetch_url(Interp& in, const std::string& url)
{
    if (url.rfind("file://", 0) == 0) {
        std::ifstream f(url.substr(7), std::ios::binary);
        if (!f)
            in.raise("URLError", fmt::format("<urlopen error [Errno 2] No such file or directory: {}>", repr(Value(url.substr(7)))));
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }
    HttpResponse res;
    try {
        res = http_get(url);
    } catch (const HttpError& e) {
        in.raise("URLError", fmt::format("<urlopen error {}>", e.what()));
    }
    if (res.status >= 400)
        in.raise("HTTPError", fmt::format("HTTP Error {}: {}", res.status, url));
    return res.body;
}

Value urllib_request_module()
{
    Attrs a;
    a["urlretrieve"] = make_builtin("urlretrieve", [](Interp& in, Args& args, Kwargs& kwargs) -> Value {
        ArgReader r(in, "urlretrieve", args, kwargs);
        std::string url = expect_str(in, r.get(0, "url"), "url");
        auto dest = r.opt(1, "filename");
        std::string body = fetch_url(in, url);
        std::string path;
        if (dest && !dest->is_none()) {
            path = expect_str(in, *dest, "filename");
        } else {
            path = (fs::temp_directory_path() / fmt::format("dynact-download-{}", std::hash<std::string>{}(url))).string();
        }
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f)
            in.raise("FileNotFoundError", fmt::format("[Errno 2] No such file or directory: {}", repr(Value(path))));
        f << body;
        return make_tuple({Value(path), none});
    });
    a["URLError"] = exception_type("URLError");
    a["HTTPError"] = exception_type("HTTPError");
    return module("urllib.request", std::move(a));
}

}  // namespace

std::optional<Value> make_module(Interp&, const std::string& name)
{
    if (name == "urllib")
        return module("urllib", Attrs{{"request", urllib_request_module()}});
    if (name == "urllib.request")
        return urllib_request_module();
    if (name == "math")
        return math_module();
    if (name == "os")
        return os_module();
    if (name == "os.path")
        return os_path_module();
    if (name == "json")
        return json_module();
    if (name == "re")
        return re_module();
    if (name == "csv")
        return csv_module();
    if (name == "string")
        return string_module();
    if (name == "time")
        return time_module();
    if (name == "statistics")
        return statistics_module();
    return std::nullopt;
}

}  // namespace dynact::minipy
