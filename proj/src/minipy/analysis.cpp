#include "interpreter.hpp"
#include "parser.hpp"

#include <fmt/format.h>

namespace dynact::minipy {

namespace {

// Depth-first traversal calling `on_expr` / `on_stmt` for every node.
template <typename OnExpr, typename OnStmt>
struct Walker {
    OnExpr on_expr;
    OnStmt on_stmt;

    void expr(const ExprPtr& e)
    {
        if (e)
            expr(*e);
    }

    void exprs(const std::vector<ExprPtr>& es)
    {
        for (const auto& e : es)
            expr(e);
    }

    void params(const std::vector<Param>& ps)
    {
        for (const auto& p : ps)
            expr(p.default_value);
    }

    void expr(const Expr& e)
    {
        on_expr(e);
        std::visit(overloaded{
                       [](const Constant&) {},
                       [](const Name&) {},
                       [&](const FString& f) {
                           for (const auto& p : f.parts)
                               expr(p.expr);
                       },
                       [&](const ListExpr& x) { exprs(x.elts); },
                       [&](const TupleExpr& x) { exprs(x.elts); },
                       [&](const SetExpr& x) { exprs(x.elts); },
                       [&](const DictExpr& x) {
                           exprs(x.keys);
                           exprs(x.values);
                       },
                       [&](const BinOp& x) {
                           expr(x.left);
                           expr(x.right);
                       },
                       [&](const UnaryOp& x) { expr(x.operand); },
                       [&](const BoolOp& x) { exprs(x.values); },
                       [&](const Compare& x) {
                           expr(x.left);
                           exprs(x.comparators);
                       },
                       [&](const IfExp& x) {
                           expr(x.test);
                           expr(x.body);
                           expr(x.orelse);
                       },
                       [&](const Starred& x) { expr(x.value); },
                       [&](const Call& x) {
                           expr(x.func);
                           exprs(x.args);
                           for (const auto& k : x.keywords)
                               expr(k.value);
                       },
                       [&](const Attribute& x) { expr(x.value); },
                       [&](const Slice& x) {
                           expr(x.lower);
                           expr(x.upper);
                           expr(x.step);
                       },
                       [&](const Subscript& x) {
                           expr(x.value);
                           expr(x.index);
                       },
                       [&](const LambdaExpr& x) {
                           params(x.params);
                           expr(x.body);
                       },
                       [&](const Comprehension& x) {
                           expr(x.key);
                           expr(x.elt);
                           for (const auto& g : x.generators) {
                               expr(g.target);
                               expr(g.iter);
                               exprs(g.ifs);
                           }
                       },
                   },
                   e.node);
    }

    void block(const Block& b)
    {
        for (const auto& s : b)
            stmt(*s);
    }

    void stmt(const Stmt& s)
    {
        on_stmt(s);
        std::visit(overloaded{
                       [&](const ExprStmt& x) { expr(x.value); },
                       [&](const Assign& x) {
                           exprs(x.targets);
                           expr(x.value);
                       },
                       [&](const AugAssign& x) {
                           expr(x.target);
                           expr(x.value);
                       },
                       [&](const AnnAssign& x) {
                           expr(x.target);
                           expr(x.value);
                       },
                       [&](const FunctionDef& x) {
                           params(x.params);
                           block(x.body);
                       },
                       [&](const Return& x) { expr(x.value); },
                       [&](const If& x) {
                           expr(x.test);
                           block(x.body);
                           block(x.orelse);
                       },
                       [&](const For& x) {
                           expr(x.target);
                           expr(x.iter);
                           block(x.body);
                           block(x.orelse);
                       },
                       [&](const While& x) {
                           expr(x.test);
                           block(x.body);
                           block(x.orelse);
                       },
                       [](const Break&) {},
                       [](const Continue&) {},
                       [](const Pass&) {},
                       [](const Import&) {},
                       [](const ImportFrom&) {},
                       [&](const With& x) {
                           for (const auto& item : x.items) {
                               expr(item.context);
                               expr(item.target);
                           }
                           block(x.body);
                       },
                       [&](const Try& x) {
                           block(x.body);
                           for (const auto& h : x.handlers) {
                               expr(h.type);
                               block(h.body);
                           }
                           block(x.orelse);
                           block(x.finalbody);
                       },
                       [&](const Raise& x) { expr(x.exc); },
                       [&](const Assert& x) {
                           expr(x.test);
                           expr(x.msg);
                       },
                       [](const Global&) {},
                       [&](const Delete& x) { exprs(x.targets); },
                   },
                   s.node);
    }
};

template <typename OnExpr, typename OnStmt>
Walker<OnExpr, OnStmt> make_walker(OnExpr e, OnStmt s)
{
    return Walker<OnExpr, OnStmt>{std::move(e), std::move(s)};
}

int complexity_of(const FunctionDef& def)
{
    int score = 1;
    auto walker = make_walker(
        [&](const Expr& e) {
            if (std::holds_alternative<IfExp>(e.node))
                score += 1;
            else if (auto* b = std::get_if<BoolOp>(&e.node))
                score += static_cast<int>(b->values.size()) - 1;
            else if (auto* c = std::get_if<Comprehension>(&e.node))
                for (const auto& g : c->generators)
                    score += 1 + static_cast<int>(g.ifs.size());
        },
        [&](const Stmt& s) {
            if (std::holds_alternative<If>(s.node) || std::holds_alternative<For>(s.node) ||
                std::holds_alternative<While>(s.node))
                score += 1;
            else if (auto* t = std::get_if<Try>(&s.node))
                score += static_cast<int>(t->handlers.size());
        });
    walker.params(def.params);
    walker.block(def.body);
    return score;
}

// "a.b.c" for attribute chains rooted at a name; otherwise the attribute
// name prefixed with "<expr>.".
std::string call_target(const Expr& func)
{
    if (auto* n = std::get_if<Name>(&func.node))
        return n->id;
    if (auto* a = std::get_if<Attribute>(&func.node)) {
        std::string base = call_target(*a->value);
        return (base.empty() ? std::string("<expr>") : base) + "." + a->attr;
    }
    return "";
}

}  // namespace

FunctionInfo describe_function(const FunctionDef& def, const Module& module)
{
    FunctionInfo info;
    info.name = def.name;
    info.docstring = def.docstring.value_or("");
    info.line = def.start_line;
    info.complexity = complexity_of(def);
    for (int l = def.start_line; l <= def.end_line && l <= static_cast<int>(module.lines.size()); ++l) {
        if (l > def.start_line)
            info.source += '\n';
        info.source += module.lines[static_cast<std::size_t>(l - 1)];
    }
    return info;
}

Analysis analyze(std::string_view code)
{
    auto module = parse_module(code);
    Analysis out;
    for (const auto& st : module->body)
        if (auto* def = std::get_if<FunctionDef>(&st->node))
            out.functions.push_back(describe_function(*def, *module));
    auto walker = make_walker(
        [&](const Expr& e) {
            if (std::holds_alternative<LambdaExpr>(e.node))
                out.all_definitions.emplace_back("<lambda>");
            else if (auto* c = std::get_if<Call>(&e.node)) {
                std::string target = call_target(*c->func);
                out.call_targets.push_back(target.empty() ? "<expr>" : target);
            }
        },
        [&](const Stmt& s) {
            if (auto* def = std::get_if<FunctionDef>(&s.node))
                out.all_definitions.push_back(def->name);
        });
    walker.block(module->body);
    return out;
}

int cyclomatic_complexity(std::string_view function_source)
{
    std::shared_ptr<Module> module;
    try {
        module = parse_module(function_source);
    } catch (const SyntaxError& e) {
        throw AnalysisError(fmt::format("cannot parse function source: {}", e.what()));
    }
    const FunctionDef* found = nullptr;
    for (const auto& st : module->body) {
        if (auto* def = std::get_if<FunctionDef>(&st->node)) {
            if (found)
                throw AnalysisError("source defines more than one top-level function");
            found = def;
        }
    }
    if (!found)
        throw AnalysisError("source does not define a function");
    return complexity_of(*found);
}

}  // namespace dynact::minipy
