#pragma once

#include "value.hpp"

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dynact::minipy {

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using Block = std::vector<StmtPtr>;

enum class BinOpKind { add, sub, mul, div, floordiv, mod, pow, bitand_, bitor_, bitxor, lshift, rshift };
enum class UnaryKind { neg, pos, not_, invert };
enum class CmpKind { eq, ne, lt, le, gt, ge, in, not_in, is, is_not };

struct Param {
    enum class Kind { normal, varargs, kwargs };
    std::string name;
    Kind kind = Kind::normal;
    ExprPtr default_value;  // normal params only
};

// --- expressions -----------------------------------------------------------

struct Constant {
    Value value;
};
struct Name {
    std::string id;
};
struct FStringPart {
    std::string literal;   // used when expr is null
    ExprPtr expr;
    char conversion = 0;   // 'r', 's' or 0
    std::string spec;
};
struct FString {
    std::vector<FStringPart> parts;
};
struct ListExpr {
    std::vector<ExprPtr> elts;
};
struct TupleExpr {
    std::vector<ExprPtr> elts;
};
struct SetExpr {
    std::vector<ExprPtr> elts;
};
struct DictExpr {
    std::vector<ExprPtr> keys;
    std::vector<ExprPtr> values;
};
struct BinOp {
    BinOpKind op;
    ExprPtr left, right;
};
struct UnaryOp {
    UnaryKind op;
    ExprPtr operand;
};
struct BoolOp {
    bool is_and = true;
    std::vector<ExprPtr> values;
};
struct Compare {
    ExprPtr left;
    std::vector<CmpKind> ops;
    std::vector<ExprPtr> comparators;
};
struct IfExp {
    ExprPtr test, body, orelse;
};
struct Starred {
    ExprPtr value;
};
struct Keyword {
    std::string name;  // empty for **mapping
    ExprPtr value;
};
struct Call {
    ExprPtr func;
    std::vector<ExprPtr> args;  // may contain Starred
    std::vector<Keyword> keywords;
};
struct Attribute {
    ExprPtr value;
    std::string attr;
};
struct Slice {
    ExprPtr lower, upper, step;
};
struct Subscript {
    ExprPtr value;
    ExprPtr index;  // may be a Slice
};
struct LambdaExpr {
    std::vector<Param> params;
    ExprPtr body;
};
struct ComprehensionFor {
    ExprPtr target;
    ExprPtr iter;
    std::vector<ExprPtr> ifs;
};
struct Comprehension {
    enum class Kind { list, set, dict, generator };
    Kind kind = Kind::list;
    ExprPtr elt;   // value for dict comprehensions
    ExprPtr key;   // dict comprehensions only
    std::vector<ComprehensionFor> generators;
};

struct Expr {
    std::variant<Constant, Name, FString, ListExpr, TupleExpr, SetExpr, DictExpr, BinOp, UnaryOp, BoolOp, Compare,
                 IfExp, Starred, Call, Attribute, Slice, Subscript, LambdaExpr, Comprehension>
        node;
    int line = 0;
};

// --- statements ------------------------------------------------------------

struct ExprStmt {
    ExprPtr value;
};
struct Assign {
    std::vector<ExprPtr> targets;
    ExprPtr value;
};
struct AugAssign {
    ExprPtr target;
    BinOpKind op;
    ExprPtr value;
};
struct AnnAssign {
    ExprPtr target;
    ExprPtr value;  // may be null
};
struct FunctionDef {
    std::string name;
    std::vector<Param> params;
    Block body;
    std::optional<std::string> docstring;
    int start_line = 0;
    int end_line = 0;
};
struct Return {
    ExprPtr value;
};
struct If {
    ExprPtr test;
    Block body;
    Block orelse;
};
struct For {
    ExprPtr target;
    ExprPtr iter;
    Block body;
    Block orelse;
};
struct While {
    ExprPtr test;
    Block body;
    Block orelse;
};
struct Break {};
struct Continue {};
struct Pass {};
struct ImportAlias {
    std::string name;  // possibly dotted
    std::string asname;
};
struct Import {
    std::vector<ImportAlias> names;
};
struct ImportFrom {
    std::string module;
    std::vector<ImportAlias> names;  // name "*" for star imports
};
struct WithItem {
    ExprPtr context;
    ExprPtr target;  // may be null
};
struct With {
    std::vector<WithItem> items;
    Block body;
};
struct ExceptHandler {
    ExprPtr type;  // null for bare except
    std::string name;
    Block body;
    int line = 0;
};
struct Try {
    Block body;
    std::vector<ExceptHandler> handlers;
    Block orelse;
    Block finalbody;
};
struct Raise {
    ExprPtr exc;
};
struct Assert {
    ExprPtr test;
    ExprPtr msg;
};
struct Global {
    std::vector<std::string> names;
};
struct Delete {
    std::vector<ExprPtr> targets;
};

struct Stmt {
    std::variant<ExprStmt, Assign, AugAssign, AnnAssign, FunctionDef, Return, If, For, While, Break, Continue, Pass,
                 Import, ImportFrom, With, Try, Raise, Assert, Global, Delete>
        node;
    int line = 0;
    int end_line = 0;
};

struct Module {
    Block body;
    std::vector<std::string> lines;  // source lines, for segments and tracebacks
};

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace dynact::minipy
