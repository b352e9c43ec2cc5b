#pragma once

// Runtime values of the mock executor's action language (a Python subset).

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace dynact::minipy {

class Interp;
struct Value;
struct FunctionDef;
struct LambdaExpr;
struct Module;
struct Scope;

struct NoneType {
    bool operator==(const NoneType&) const { return true; }
};

struct ListObj {
    std::vector<Value> items;
};

struct TupleObj {
    std::vector<Value> items;
};

// Insertion-ordered hash map keyed by a canonical key string. Also backs sets
// (values unused).
struct DictObj {
    bool is_set = false;
    std::vector<std::pair<Value, Value>> entries;
    std::unordered_map<std::string, std::size_t> index;

    const Value* find(const Value& key) const;
    Value* find(const Value& key);
    void set(const Value& key, Value value);
    bool erase(const Value& key);
};

using Args = std::vector<Value>;
using Kwargs = std::vector<std::pair<std::string, Value>>;
using NativeFn = std::function<Value(Interp&, Args&, Kwargs&)>;

struct BuiltinObj {
    std::string name;
    NativeFn fn;
    // Exception classes and type objects are callable builtins with a tag.
    bool is_exception_type = false;
    bool is_type = false;
};

struct FunctionObj {
    std::string name;
    const FunctionDef* def = nullptr;   // one of def / lambda is set
    const LambdaExpr* lambda = nullptr;
    std::shared_ptr<const Module> owner;  // keeps the syntax tree alive
    std::vector<Value> defaults;          // aligned with parameters having defaults
    std::shared_ptr<Scope> closure;       // null for module-level functions
    std::string docstring;
};

struct ModuleObj {
    std::string name;
    std::map<std::string, Value> attrs;
    bool stub = false;  // unavailable module: any attribute use raises
};

struct FileObj {
    std::string path;
    std::string content;
    std::size_t pos = 0;
    char mode = 'r';  // r, w or a
    bool closed = false;
};

struct RangeObj {
    std::int64_t start = 0, stop = 0, step = 1;
    std::int64_t size() const;
    std::int64_t at(std::int64_t i) const { return start + i * step; }
};

struct ExceptionObj {
    std::string type;
    std::string message;
};

struct MatchObj {
    std::vector<std::optional<std::string>> groups;  // group 0 is the whole match
    std::vector<std::int64_t> starts;                 // -1 for unmatched groups
    std::map<std::string, std::size_t> names;
    std::int64_t start = 0, end = 0;
};

using ValueVariant = std::variant<NoneType, bool, std::int64_t, double, std::string, std::shared_ptr<ListObj>,
                                  std::shared_ptr<TupleObj>, std::shared_ptr<DictObj>, std::shared_ptr<FunctionObj>,
                                  std::shared_ptr<BuiltinObj>, std::shared_ptr<ModuleObj>, std::shared_ptr<FileObj>,
                                  std::shared_ptr<RangeObj>, std::shared_ptr<ExceptionObj>, std::shared_ptr<MatchObj>>;

struct Value {
    ValueVariant v;

    Value() = default;
    Value(NoneType n) : v(n) {}
    Value(bool b) : v(b) {}
    Value(int i) : v(static_cast<std::int64_t>(i)) {}
    Value(std::int64_t i) : v(i) {}
    Value(double d) : v(d) {}
    Value(std::string s) : v(std::move(s)) {}
    Value(const char* s) : v(std::string(s)) {}
    template <typename T>
    Value(std::shared_ptr<T> p) : v(std::move(p))
    {
    }

    template <typename T>
    bool is() const
    {
        return std::holds_alternative<T>(v);
    }
    template <typename T>
    const T& as() const
    {
        return std::get<T>(v);
    }
    template <typename T>
    T& as()
    {
        return std::get<T>(v);
    }

    bool is_none() const { return is<NoneType>(); }
    bool is_number() const { return is<std::int64_t>() || is<double>() || is<bool>(); }
};

inline const Value none{NoneType{}};

Value make_list(std::vector<Value> items = {});
Value make_tuple(std::vector<Value> items = {});
Value make_dict();
Value make_set();
Value make_builtin(std::string name, NativeFn fn);

std::string type_name(const Value& v);
std::string repr(const Value& v);
std::string str(const Value& v);
std::string format_float(double d);
bool truthy(const Value& v);
bool equals(const Value& a, const Value& b);

// Canonical hashing key; nullopt for unhashable values.
std::optional<std::string> hash_key(const Value& v);

}  // namespace dynact::minipy
