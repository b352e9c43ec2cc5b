#include "parser.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <unordered_set>

#include <fmt/format.h>

namespace dynact::minipy {

SyntaxError::SyntaxError(std::string message, int line)
    : Error(fmt::format("{} (line {})", message, line)), bare_(std::move(message)), line_(line)
{
}

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok { name, number, string, op, newline, indent, dedent, end };

struct Token {
    Tok kind;
    std::string text;
    int line = 0;
    int end_line = 0;
    bool fstring = false;
    bool raw = false;
};

const std::unordered_set<std::string_view> keywords = {
    "and",   "or",   "not",    "in",     "is",     "if",     "else",   "elif",  "for",   "while",
    "def",   "return", "lambda", "None", "True",   "False",  "pass",   "break", "continue", "import",
    "from",  "as",   "with",   "try",    "except", "finally", "raise", "assert", "global", "del",
    "class", "yield", "async", "await",  "nonlocal"};

void append_utf8(std::string& out, std::uint32_t cp)
{
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

std::string decode_escapes(std::string_view raw, int line)
{
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c != '\\' || i + 1 >= raw.size()) {
            out += c;
            continue;
        }
        char e = raw[++i];
        auto hex = [&](std::size_t n) -> std::uint32_t {
            if (i + n >= raw.size())
                throw SyntaxError("truncated escape sequence", line);
            std::uint32_t v = 0;
            auto digits = raw.substr(i + 1, n);
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, 16);
            if (ec != std::errc{} || p != digits.data() + digits.size())
                throw SyntaxError("invalid escape sequence", line);
            i += n;
            return v;
        };
        switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '0': out += '\0'; break;
        case 'a': out += '\a'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'v': out += '\v'; break;
        case '\\': out += '\\'; break;
        case '\'': out += '\''; break;
        case '"': out += '"'; break;
        case '\n': break;
        case 'x': append_utf8(out, hex(2)); break;
        case 'u': append_utf8(out, hex(4)); break;
        case 'U': append_utf8(out, hex(8)); break;
        default:
            out += '\\';
            out += e;
        }
    }
    return out;
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run()
    {
        std::vector<int> indents{0};
        bool line_start = true;
        while (true) {
            if (line_start && depth_ == 0) {
                int width = 0;
                std::size_t p = pos_;
                while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
                    width = src_[p] == '\t' ? (width / 8 + 1) * 8 : width + 1;
                    ++p;
                }
                if (p >= src_.size()) {
                    pos_ = p;
                    break;
                }
                if (src_[p] == '#' || src_[p] == '\n' || src_[p] == '\r') {
                    while (p < src_.size() && src_[p] != '\n')
                        ++p;
                    if (p < src_.size()) {
                        ++p;
                        ++line_;
                    }
                    pos_ = p;
                    continue;
                }
                pos_ = p;
                line_start = false;
                if (width > indents.back()) {
                    indents.push_back(width);
                    push(Tok::indent, "");
                } else {
                    while (width < indents.back()) {
                        indents.pop_back();
                        push(Tok::dedent, "");
                    }
                    if (width != indents.back())
                        throw SyntaxError("unindent does not match any outer indentation level", line_);
                }
            }
            if (pos_ >= src_.size())
                break;
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    ++pos_;
            } else if (c == '\\' && pos_ + 1 < src_.size() && (src_[pos_ + 1] == '\n' || src_[pos_ + 1] == '\r')) {
                pos_ += src_[pos_ + 1] == '\r' ? 3 : 2;
                ++line_;
            } else if (c == '\n') {
                if (depth_ == 0 && !tokens_.empty() && tokens_.back().kind != Tok::newline &&
                    tokens_.back().kind != Tok::indent && tokens_.back().kind != Tok::dedent)
                    push(Tok::newline, "");
                ++pos_;
                ++line_;
                line_start = depth_ == 0;
            } else if (is_alpha(c)) {
                lex_name_or_prefixed_string();
            } else if (is_digit(c) || (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
                lex_number();
            } else if (c == '"' || c == '\'') {
                lex_string(false, false);
            } else {
                lex_op();
            }
        }
        if (depth_ > 0)
            throw SyntaxError("unexpected EOF: unclosed bracket", line_);
        if (!tokens_.empty() && tokens_.back().kind != Tok::newline && tokens_.back().kind != Tok::dedent)
            push(Tok::newline, "");
        while (indents.size() > 1) {
            indents.pop_back();
            push(Tok::dedent, "");
        }
        push(Tok::end, "");
        return std::move(tokens_);
    }

private:
    static bool is_alpha(char c)
    {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || static_cast<unsigned char>(c) >= 0x80;
    }
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }

    void push(Tok kind, std::string text, int start_line = -1)
    {
        int l = start_line < 0 ? line_ : start_line;
        tokens_.push_back(Token{kind, std::move(text), l, line_});
    }

    void lex_name_or_prefixed_string()
    {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (is_alpha(src_[pos_]) || is_digit(src_[pos_])))
            ++pos_;
        std::string word(src_.substr(start, pos_ - start));
        if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'') && word.size() <= 2) {
            std::string lower = word;
            std::transform(lower.begin(), lower.end(), lower.begin(), [](char ch) { return std::tolower(ch); });
            bool valid = std::all_of(lower.begin(), lower.end(),
                                     [](char ch) { return ch == 'r' || ch == 'f' || ch == 'b' || ch == 'u'; });
            if (valid) {
                lex_string(lower.find('f') != std::string::npos, lower.find('r') != std::string::npos);
                return;
            }
        }
        push(Tok::name, std::move(word));
    }

    void lex_number()
    {
        std::size_t start = pos_;
        if (src_[pos_] == '0' && pos_ + 1 < src_.size() &&
            (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X' || src_[pos_ + 1] == 'o' || src_[pos_ + 1] == 'O' ||
             src_[pos_ + 1] == 'b' || src_[pos_ + 1] == 'B')) {
            pos_ += 2;
            while (pos_ < src_.size() && (std::isxdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
        } else {
            while (pos_ < src_.size() && (is_digit(src_[pos_]) || src_[pos_] == '_'))
                ++pos_;
            if (pos_ < src_.size() && src_[pos_] == '.') {
                ++pos_;
                while (pos_ < src_.size() && (is_digit(src_[pos_]) || src_[pos_] == '_'))
                    ++pos_;
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t save = pos_;
                ++pos_;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
                    ++pos_;
                if (pos_ < src_.size() && is_digit(src_[pos_])) {
                    while (pos_ < src_.size() && is_digit(src_[pos_]))
                        ++pos_;
                } else {
                    pos_ = save;
                }
            }
        }
        if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J'))
            throw SyntaxError("complex literals are not supported", line_);
        if (pos_ < src_.size() && is_alpha(src_[pos_]))
            throw SyntaxError("invalid decimal literal", line_);
        std::string text(src_.substr(start, pos_ - start));
        text.erase(std::remove(text.begin(), text.end(), '_'), text.end());
        push(Tok::number, std::move(text));
    }

    void lex_string(bool fstring, bool raw)
    {
        int start_line = line_;
        char q = src_[pos_];
        bool triple = src_.substr(pos_, 3) == std::string(3, q);
        pos_ += triple ? 3 : 1;
        std::size_t start = pos_;
        while (true) {
            if (pos_ >= src_.size())
                throw SyntaxError("unterminated string literal", start_line);
            char c = src_[pos_];
            if (c == '\\') {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n')
                    ++line_;
                pos_ += 2;
                continue;
            }
            if (c == '\n') {
                if (!triple)
                    throw SyntaxError("unterminated string literal", start_line);
                ++line_;
            }
            if (c == q) {
                if (!triple)
                    break;
                if (src_.substr(pos_, 3) == std::string(3, q))
                    break;
            }
            ++pos_;
        }
        std::string_view body = src_.substr(start, pos_ - start);
        pos_ += triple ? 3 : 1;
        Token t{Tok::string, "", start_line, line_, fstring, raw};
        if (fstring)
            t.text = std::string(body);
        else
            t.text = raw ? std::string(body) : decode_escapes(body, start_line);
        tokens_.push_back(std::move(t));
    }

    void lex_op()
    {
        static constexpr std::array<std::string_view, 24> multi = {
            "**=", "//=", ">>=", "<<=", "...", "->", "**", "//", "==", "!=", "<=", ">=",
            "+=",  "-=",  "*=",  "/=",  "%=",  "&=", "|=", "^=", "<<", ">>", ":=", "@="};
        for (auto m : multi) {
            if (src_.substr(pos_, m.size()) == m) {
                if (m == ":=")
                    throw SyntaxError("assignment expressions are not supported", line_);
                pos_ += m.size();
                push(Tok::op, std::string(m));
                return;
            }
        }
        char c = src_[pos_];
        static constexpr std::string_view singles = "+-*/%<>=()[]{},:.;@&|^~";
        if (singles.find(c) == std::string_view::npos)
            throw SyntaxError(fmt::format("invalid character '{}'", c), line_);
        if (c == '(' || c == '[' || c == '{')
            ++depth_;
        if ((c == ')' || c == ']' || c == '}') && depth_ > 0)
            --depth_;
        ++pos_;
        push(Tok::op, std::string(1, c));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int depth_ = 0;
    std::vector<Token> tokens_;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

template <typename T>
ExprPtr make_expr(T node, int line)
{
    auto e = std::make_unique<Expr>();
    e->node = std::move(node);
    e->line = line;
    return e;
}

template <typename T>
StmtPtr make_stmt(T node, int line, int end_line)
{
    auto s = std::make_unique<Stmt>();
    s->node = std::move(node);
    s->line = line;
    s->end_line = end_line;
    return s;
}

ExprPtr parse_expression_text(std::string_view text, int line);

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    Block parse_file()
    {
        Block body;
        while (!at(Tok::end)) {
            if (accept_kind(Tok::newline))
                continue;
            parse_statement(body);
        }
        return body;
    }

    ExprPtr parse_lone_expression()
    {
        while (accept_kind(Tok::newline)) {
        }
        auto e = parse_testlist();
        while (accept_kind(Tok::newline)) {
        }
        if (!at(Tok::end))
            fail("invalid syntax");
        return e;
    }

private:
    // --- token helpers ---------------------------------------------------
    const Token& peek(std::size_t ahead = 0) const
    {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    bool at(Tok kind) const { return peek().kind == kind; }
    bool at_op(std::string_view op) const { return peek().kind == Tok::op && peek().text == op; }
    bool at_kw(std::string_view kw) const { return peek().kind == Tok::name && peek().text == kw; }
    const Token& advance()
    {
        const Token& t = toks_[pos_];
        if (t.kind != Tok::newline && t.kind != Tok::indent && t.kind != Tok::dedent && t.kind != Tok::end)
            last_line_ = t.end_line;
        if (pos_ + 1 < toks_.size())
            ++pos_;
        return t;
    }
    bool accept_kind(Tok kind)
    {
        if (!at(kind))
            return false;
        advance();
        return true;
    }
    bool accept_op(std::string_view op)
    {
        if (!at_op(op))
            return false;
        advance();
        return true;
    }
    bool accept_kw(std::string_view kw)
    {
        if (!at_kw(kw))
            return false;
        advance();
        return true;
    }
    [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, peek().line); }
    void expect_op(std::string_view op)
    {
        if (!accept_op(op))
            fail(fmt::format("expected '{}'", op));
    }
    void expect_kw(std::string_view kw)
    {
        if (!accept_kw(kw))
            fail(fmt::format("expected '{}'", kw));
    }
    std::string expect_name()
    {
        if (!at(Tok::name) || keywords.count(peek().text))
            fail("expected a name");
        return advance().text;
    }
    void expect_newline()
    {
        if (at(Tok::end))
            return;
        if (!accept_kind(Tok::newline))
            fail("invalid syntax");
    }

    // --- statements ------------------------------------------------------
    void parse_statement(Block& out)
    {
        const Token& t = peek();
        if (t.kind == Tok::indent)
            fail("unexpected indent");
        if (t.kind == Tok::name) {
            if (t.text == "def") {
                out.push_back(parse_def());
                return;
            }
            if (t.text == "if") {
                out.push_back(parse_if());
                return;
            }
            if (t.text == "for") {
                out.push_back(parse_for());
                return;
            }
            if (t.text == "while") {
                out.push_back(parse_while());
                return;
            }
            if (t.text == "try") {
                out.push_back(parse_try());
                return;
            }
            if (t.text == "with") {
                out.push_back(parse_with());
                return;
            }
            if (t.text == "class")
                fail("class definitions are not supported by this executor");
            if (t.text == "async" || t.text == "yield" || t.text == "await")
                fail(fmt::format("'{}' is not supported by this executor", t.text));
            if (t.text == "else" || t.text == "elif" || t.text == "except" || t.text == "finally")
                fail("invalid syntax");
        }
        parse_simple_line(out);
    }

    void parse_simple_line(Block& out)
    {
        out.push_back(parse_simple());
        while (accept_op(";")) {
            if (at(Tok::newline) || at(Tok::end))
                break;
            out.push_back(parse_simple());
        }
        expect_newline();
    }

    Block parse_suite()
    {
        expect_op(":");
        Block body;
        if (accept_kind(Tok::newline)) {
            if (!accept_kind(Tok::indent))
                fail("expected an indented block");
            while (!accept_kind(Tok::dedent)) {
                if (at(Tok::end))
                    break;
                if (accept_kind(Tok::newline))
                    continue;
                parse_statement(body);
            }
        } else {
            parse_simple_line(body);
        }
        if (body.empty())
            fail("expected an indented block");
        return body;
    }

    std::vector<Param> parse_params(std::string_view closer)
    {
        std::vector<Param> params;
        bool seen_default = false;
        while (!at_op(closer)) {
            Param p;
            if (accept_op("**")) {
                p.kind = Param::Kind::kwargs;
                p.name = expect_name();
            } else if (accept_op("*")) {
                p.kind = Param::Kind::varargs;
                p.name = expect_name();
            } else {
                p.name = expect_name();
            }
            if (closer == ")" && accept_op(":"))
                parse_test();  // annotation, ignored
            if (p.kind == Param::Kind::normal) {
                if (accept_op("=")) {
                    p.default_value = parse_test();
                    seen_default = true;
                } else if (seen_default && !has_varargs(params)) {
                    fail("non-default argument follows default argument");
                }
            }
            params.push_back(std::move(p));
            if (!accept_op(","))
                break;
        }
        return params;
    }

    static bool has_varargs(const std::vector<Param>& ps)
    {
        return std::any_of(ps.begin(), ps.end(), [](const Param& p) { return p.kind != Param::Kind::normal; });
    }

    StmtPtr parse_def()
    {
        int line = peek().line;
        expect_kw("def");
        FunctionDef def;
        def.name = expect_name();
        expect_op("(");
        def.params = parse_params(")");
        expect_op(")");
        if (accept_op("->"))
            parse_test();
        def.body = parse_suite();
        def.start_line = line;
        def.end_line = last_line_;
        if (!def.body.empty()) {
            if (auto* es = std::get_if<ExprStmt>(&def.body.front()->node)) {
                if (auto* c = std::get_if<Constant>(&es->value->node); c && c->value.is<std::string>())
                    def.docstring = clean_docstring(c->value.as<std::string>());
            }
        }
        int end = def.end_line;
        return make_stmt(std::move(def), line, end);
    }

    StmtPtr parse_if()
    {
        int line = peek().line;
        advance();  // if / elif
        If node;
        node.test = parse_test();
        node.body = parse_suite();
        if (at_kw("elif")) {
            node.orelse.push_back(parse_if());
        } else if (accept_kw("else")) {
            node.orelse = parse_suite();
        }
        return make_stmt(std::move(node), line, last_line_);
    }

    StmtPtr parse_for()
    {
        int line = peek().line;
        expect_kw("for");
        For node;
        node.target = parse_target_list();
        expect_kw("in");
        node.iter = parse_testlist();
        node.body = parse_suite();
        if (accept_kw("else"))
            node.orelse = parse_suite();
        return make_stmt(std::move(node), line, last_line_);
    }

    StmtPtr parse_while()
    {
        int line = peek().line;
        expect_kw("while");
        While node;
        node.test = parse_test();
        node.body = parse_suite();
        if (accept_kw("else"))
            node.orelse = parse_suite();
        return make_stmt(std::move(node), line, last_line_);
    }

    StmtPtr parse_try()
    {
        int line = peek().line;
        expect_kw("try");
        Try node;
        node.body = parse_suite();
        while (at_kw("except")) {
            ExceptHandler h;
            h.line = peek().line;
            advance();
            if (!at_op(":")) {
                h.type = parse_test();
                if (accept_kw("as"))
                    h.name = expect_name();
            }
            h.body = parse_suite();
            node.handlers.push_back(std::move(h));
        }
        if (accept_kw("else")) {
            if (node.handlers.empty())
                fail("invalid syntax");
            node.orelse = parse_suite();
        }
        if (accept_kw("finally"))
            node.finalbody = parse_suite();
        if (node.handlers.empty() && node.finalbody.empty())
            fail("expected 'except' or 'finally' block");
        return make_stmt(std::move(node), line, last_line_);
    }

    StmtPtr parse_with()
    {
        int line = peek().line;
        expect_kw("with");
        With node;
        do {
            WithItem item;
            item.context = parse_test();
            if (accept_kw("as")) {
                item.target = parse_target_atom();
            }
            node.items.push_back(std::move(item));
        } while (accept_op(","));
        node.body = parse_suite();
        return make_stmt(std::move(node), line, last_line_);
    }

    std::string parse_dotted()
    {
        std::string name = expect_name();
        while (accept_op("."))
            name += "." + expect_name();
        return name;
    }

    StmtPtr parse_simple()
    {
        int line = peek().line;
        if (accept_kw("pass"))
            return make_stmt(Pass{}, line, line);
        if (accept_kw("break"))
            return make_stmt(Break{}, line, line);
        if (accept_kw("continue"))
            return make_stmt(Continue{}, line, line);
        if (accept_kw("return")) {
            Return r;
            if (!at(Tok::newline) && !at_op(";") && !at(Tok::end))
                r.value = parse_testlist();
            return make_stmt(std::move(r), line, last_line_);
        }
        if (accept_kw("raise")) {
            Raise r;
            if (!at(Tok::newline) && !at_op(";") && !at(Tok::end)) {
                r.exc = parse_test();
                if (accept_kw("from"))
                    parse_test();
            }
            return make_stmt(std::move(r), line, last_line_);
        }
        if (accept_kw("global") || accept_kw("nonlocal")) {
            Global g;
            do {
                g.names.push_back(expect_name());
            } while (accept_op(","));
            return make_stmt(std::move(g), line, last_line_);
        }
        if (accept_kw("del")) {
            Delete d;
            do {
                d.targets.push_back(parse_target_atom());
            } while (accept_op(","));
            return make_stmt(std::move(d), line, last_line_);
        }
        if (accept_kw("assert")) {
            Assert a;
            a.test = parse_test();
            if (accept_op(","))
                a.msg = parse_test();
            return make_stmt(std::move(a), line, last_line_);
        }
        if (accept_kw("import")) {
            Import imp;
            do {
                ImportAlias alias;
                alias.name = parse_dotted();
                if (accept_kw("as"))
                    alias.asname = expect_name();
                imp.names.push_back(std::move(alias));
            } while (accept_op(","));
            return make_stmt(std::move(imp), line, last_line_);
        }
        if (accept_kw("from")) {
            ImportFrom imp;
            while (accept_op("."))
                imp.module += ".";
            imp.module += parse_dotted();
            expect_kw("import");
            if (accept_op("*")) {
                imp.names.push_back({"*", ""});
            } else {
                bool paren = accept_op("(");
                do {
                    if (paren && at_op(")"))
                        break;
                    ImportAlias alias;
                    alias.name = expect_name();
                    if (accept_kw("as"))
                        alias.asname = expect_name();
                    imp.names.push_back(std::move(alias));
                } while (accept_op(","));
                if (paren)
                    expect_op(")");
            }
            return make_stmt(std::move(imp), line, last_line_);
        }

        auto first = parse_testlist(true);
        static const std::array<std::pair<std::string_view, BinOpKind>, 12> aug = {{{"+=", BinOpKind::add},
                                                                                   {"-=", BinOpKind::sub},
                                                                                   {"*=", BinOpKind::mul},
                                                                                   {"/=", BinOpKind::div},
                                                                                   {"//=", BinOpKind::floordiv},
                                                                                   {"%=", BinOpKind::mod},
                                                                                   {"**=", BinOpKind::pow},
                                                                                   {"&=", BinOpKind::bitand_},
                                                                                   {"|=", BinOpKind::bitor_},
                                                                                   {"^=", BinOpKind::bitxor},
                                                                                   {"<<=", BinOpKind::lshift},
                                                                                   {">>=", BinOpKind::rshift}}};
        for (auto [text, kind] : aug) {
            if (accept_op(text)) {
                check_target(*first, false);
                AugAssign a;
                a.target = std::move(first);
                a.op = kind;
                a.value = parse_testlist();
                return make_stmt(std::move(a), line, last_line_);
            }
        }
        if (at_op(":")) {
            advance();
            check_target(*first, false);
            AnnAssign a;
            a.target = std::move(first);
            parse_test();
            if (accept_op("="))
                a.value = parse_testlist();
            return make_stmt(std::move(a), line, last_line_);
        }
        if (at_op("=")) {
            Assign a;
            a.targets.push_back(std::move(first));
            while (accept_op("="))
                a.targets.push_back(parse_testlist(true));
            a.value = std::move(a.targets.back());
            a.targets.pop_back();
            for (auto& t : a.targets)
                check_target(*t, true);
            return make_stmt(std::move(a), line, last_line_);
        }
        return make_stmt(ExprStmt{std::move(first)}, line, last_line_);
    }

    void check_target(const Expr& e, bool allow_unpack) const
    {
        bool ok = std::visit(overloaded{[](const Name&) { return true; },
                                        [](const Attribute&) { return true; },
                                        [](const Subscript&) { return true; },
                                        [&](const TupleExpr& t) {
                                            if (!allow_unpack)
                                                return false;
                                            for (auto& x : t.elts)
                                                check_target(*x, true);
                                            return true;
                                        },
                                        [&](const ListExpr& t) {
                                            if (!allow_unpack)
                                                return false;
                                            for (auto& x : t.elts)
                                                check_target(*x, true);
                                            return true;
                                        },
                                        [&](const Starred& s) {
                                            check_target(*s.value, false);
                                            return allow_unpack;
                                        },
                                        [](const auto&) { return false; }},
                             e.node);
        if (!ok)
            throw SyntaxError("cannot assign to expression", e.line);
    }

    // Targets of for-loops and comprehensions: a comma list of primaries.
    ExprPtr parse_target_list()
    {
        int line = peek().line;
        std::vector<ExprPtr> elts;
        bool trailing = false;
        do {
            if (at_kw("in"))
                break;
            elts.push_back(parse_target_atom());
            trailing = at_op(",");
        } while (accept_op(","));
        if (elts.size() == 1 && !trailing)
            return std::move(elts.front());
        auto t = make_expr(TupleExpr{std::move(elts)}, line);
        check_target(*t, true);
        return t;
    }

    ExprPtr parse_target_atom()
    {
        int line = peek().line;
        if (accept_op("*"))
            return make_expr(Starred{parse_target_atom()}, line);
        auto e = parse_bitor();
        check_target(*e, true);
        return e;
    }

    // --- expressions -----------------------------------------------------
    ExprPtr parse_testlist(bool allow_star = false)
    {
        int line = peek().line;
        auto first = parse_test_or_star(allow_star);
        if (!at_op(","))
            return first;
        std::vector<ExprPtr> elts;
        elts.push_back(std::move(first));
        while (accept_op(",")) {
            if (at(Tok::newline) || at(Tok::end) || at_op("=") || at_op(")") || at_op(";") || at_op(":"))
                break;
            elts.push_back(parse_test_or_star(allow_star));
        }
        return make_expr(TupleExpr{std::move(elts)}, line);
    }

    ExprPtr parse_test_or_star(bool allow_star)
    {
        if (allow_star && at_op("*")) {
            int line = advance().line;
            return make_expr(Starred{parse_bitor()}, line);
        }
        return parse_test();
    }

    ExprPtr parse_test()
    {
        int line = peek().line;
        if (accept_kw("lambda")) {
            LambdaExpr l;
            l.params = parse_params(":");
            expect_op(":");
            l.body = parse_test();
            return make_expr(std::move(l), line);
        }
        auto cond_body = parse_or();
        if (at_kw("if") && !no_ternary_) {
            advance();
            IfExp ie;
            ie.body = std::move(cond_body);
            ie.test = parse_or();
            expect_kw("else");
            ie.orelse = parse_test();
            return make_expr(std::move(ie), line);
        }
        return cond_body;
    }

    ExprPtr parse_or()
    {
        int line = peek().line;
        auto left = parse_and();
        if (!at_kw("or"))
            return left;
        BoolOp op{false, {}};
        op.values.push_back(std::move(left));
        while (accept_kw("or"))
            op.values.push_back(parse_and());
        return make_expr(std::move(op), line);
    }

    ExprPtr parse_and()
    {
        int line = peek().line;
        auto left = parse_not();
        if (!at_kw("and"))
            return left;
        BoolOp op{true, {}};
        op.values.push_back(std::move(left));
        while (accept_kw("and"))
            op.values.push_back(parse_not());
        return make_expr(std::move(op), line);
    }

    ExprPtr parse_not()
    {
        int line = peek().line;
        if (accept_kw("not"))
            return make_expr(UnaryOp{UnaryKind::not_, parse_not()}, line);
        return parse_comparison();
    }

    std::optional<CmpKind> comparison_op()
    {
        const Token& t = peek();
        if (t.kind == Tok::op) {
            static const std::array<std::pair<std::string_view, CmpKind>, 6> ops = {{{"==", CmpKind::eq},
                                                                                     {"!=", CmpKind::ne},
                                                                                     {"<", CmpKind::lt},
                                                                                     {"<=", CmpKind::le},
                                                                                     {">", CmpKind::gt},
                                                                                     {">=", CmpKind::ge}}};
            for (auto [text, kind] : ops)
                if (t.text == text) {
                    advance();
                    return kind;
                }
            return std::nullopt;
        }
        if (t.kind != Tok::name)
            return std::nullopt;
        if (t.text == "in") {
            advance();
            return CmpKind::in;
        }
        if (t.text == "not" && peek(1).kind == Tok::name && peek(1).text == "in") {
            advance();
            advance();
            return CmpKind::not_in;
        }
        if (t.text == "is") {
            advance();
            if (accept_kw("not"))
                return CmpKind::is_not;
            return CmpKind::is;
        }
        return std::nullopt;
    }

    ExprPtr parse_comparison()
    {
        int line = peek().line;
        auto left = parse_bitor();
        Compare cmp;
        while (auto op = comparison_op()) {
            cmp.ops.push_back(*op);
            cmp.comparators.push_back(parse_bitor());
        }
        if (cmp.ops.empty())
            return left;
        cmp.left = std::move(left);
        return make_expr(std::move(cmp), line);
    }

    ExprPtr parse_binary_level(int level)
    {
        static const std::array<std::vector<std::pair<std::string_view, BinOpKind>>, 6> levels = {{
            {{"|", BinOpKind::bitor_}},
            {{"^", BinOpKind::bitxor}},
            {{"&", BinOpKind::bitand_}},
            {{"<<", BinOpKind::lshift}, {">>", BinOpKind::rshift}},
            {{"+", BinOpKind::add}, {"-", BinOpKind::sub}},
            {{"*", BinOpKind::mul}, {"/", BinOpKind::div}, {"//", BinOpKind::floordiv}, {"%", BinOpKind::mod}},
        }};
        if (level == static_cast<int>(levels.size()))
            return parse_factor();
        int line = peek().line;
        auto left = parse_binary_level(level + 1);
        while (true) {
            std::optional<BinOpKind> kind;
            for (auto [text, k] : levels[level])
                if (at_op(text))
                    kind = k;
            if (!kind)
                break;
            advance();
            auto right = parse_binary_level(level + 1);
            left = make_expr(BinOp{*kind, std::move(left), std::move(right)}, line);
        }
        return left;
    }

    ExprPtr parse_bitor() { return parse_binary_level(0); }

    ExprPtr parse_factor()
    {
        int line = peek().line;
        if (accept_op("-"))
            return make_expr(UnaryOp{UnaryKind::neg, parse_factor()}, line);
        if (accept_op("+"))
            return make_expr(UnaryOp{UnaryKind::pos, parse_factor()}, line);
        if (accept_op("~"))
            return make_expr(UnaryOp{UnaryKind::invert, parse_factor()}, line);
        return parse_power();
    }

    ExprPtr parse_power()
    {
        int line = peek().line;
        auto base = parse_primary();
        if (accept_op("**"))
            return make_expr(BinOp{BinOpKind::pow, std::move(base), parse_factor()}, line);
        return base;
    }

    ExprPtr parse_primary()
    {
        auto e = parse_atom();
        while (true) {
            int line = peek().line;
            if (accept_op("(")) {
                e = make_expr(parse_call_args(std::move(e)), line);
            } else if (accept_op("[")) {
                auto index = parse_subscript();
                expect_op("]");
                e = make_expr(Subscript{std::move(e), std::move(index)}, line);
            } else if (accept_op(".")) {
                e = make_expr(Attribute{std::move(e), expect_name()}, line);
            } else {
                return e;
            }
        }
    }

    Call parse_call_args(ExprPtr func)
    {
        Call call;
        call.func = std::move(func);
        while (!at_op(")")) {
            int line = peek().line;
            if (accept_op("**")) {
                call.keywords.push_back(Keyword{"", parse_test()});
            } else if (accept_op("*")) {
                call.args.push_back(make_expr(Starred{parse_test()}, line));
            } else if (at(Tok::name) && peek(1).kind == Tok::op && peek(1).text == "=") {
                std::string name = advance().text;
                advance();
                call.keywords.push_back(Keyword{std::move(name), parse_test()});
            } else {
                auto arg = parse_test();
                if (at_kw("for")) {
                    arg = parse_comprehension(Comprehension::Kind::generator, std::move(arg), nullptr, line);
                } else if (!call.keywords.empty()) {
                    fail("positional argument follows keyword argument");
                }
                call.args.push_back(std::move(arg));
            }
            if (!accept_op(","))
                break;
        }
        expect_op(")");
        return call;
    }

    ExprPtr parse_subscript()
    {
        int line = peek().line;
        auto one = [&]() -> ExprPtr {
            int l = peek().line;
            ExprPtr lower;
            if (!at_op(":"))
                lower = parse_test();
            if (!at_op(":"))
                return lower;
            advance();
            Slice s;
            s.lower = std::move(lower);
            if (!at_op("]") && !at_op(":") && !at_op(","))
                s.upper = parse_test();
            if (accept_op(":") && !at_op("]") && !at_op(","))
                s.step = parse_test();
            return make_expr(std::move(s), l);
        };
        auto first = one();
        if (!at_op(","))
            return first;
        std::vector<ExprPtr> elts;
        elts.push_back(std::move(first));
        while (accept_op(",") && !at_op("]"))
            elts.push_back(one());
        return make_expr(TupleExpr{std::move(elts)}, line);
    }

    ExprPtr parse_comprehension(Comprehension::Kind kind, ExprPtr elt, ExprPtr key, int line)
    {
        Comprehension c;
        c.kind = kind;
        c.elt = std::move(elt);
        c.key = std::move(key);
        while (accept_kw("for")) {
            ComprehensionFor gen;
            gen.target = parse_target_list();
            expect_kw("in");
            no_ternary_ = true;
            gen.iter = parse_or();
            while (accept_kw("if"))
                gen.ifs.push_back(parse_or());
            no_ternary_ = false;
            c.generators.push_back(std::move(gen));
        }
        return make_expr(std::move(c), line);
    }

    ExprPtr parse_atom()
    {
        const Token& t = peek();
        int line = t.line;
        switch (t.kind) {
        case Tok::number: {
            std::string text = advance().text;
            return make_expr(Constant{parse_number(text, line)}, line);
        }
        case Tok::string:
            return parse_strings();
        case Tok::name: {
            if (t.text == "None") {
                advance();
                return make_expr(Constant{none}, line);
            }
            if (t.text == "True" || t.text == "False") {
                bool b = advance().text == "True";
                return make_expr(Constant{Value(b)}, line);
            }
            if (keywords.count(t.text))
                fail("invalid syntax");
            return make_expr(Name{advance().text}, line);
        }
        case Tok::op:
            break;
        default:
            fail("invalid syntax");
        }
        if (accept_op("..."))
            return make_expr(Constant{none}, line);
        if (accept_op("(")) {
            bool saved = no_ternary_;
            no_ternary_ = false;
            if (accept_op(")")) {
                no_ternary_ = saved;
                return make_expr(TupleExpr{}, line);
            }
            auto first = parse_test_or_star(true);
            if (at_kw("for")) {
                auto gen = parse_comprehension(Comprehension::Kind::generator, std::move(first), nullptr, line);
                expect_op(")");
                no_ternary_ = saved;
                return gen;
            }
            if (accept_op(")")) {
                no_ternary_ = saved;
                return first;
            }
            std::vector<ExprPtr> elts;
            elts.push_back(std::move(first));
            while (accept_op(",")) {
                if (at_op(")"))
                    break;
                elts.push_back(parse_test_or_star(true));
            }
            expect_op(")");
            no_ternary_ = saved;
            return make_expr(TupleExpr{std::move(elts)}, line);
        }
        if (accept_op("[")) {
            bool saved = no_ternary_;
            no_ternary_ = false;
            ListExpr list;
            if (!at_op("]")) {
                auto first = parse_test_or_star(true);
                if (at_kw("for")) {
                    auto c = parse_comprehension(Comprehension::Kind::list, std::move(first), nullptr, line);
                    expect_op("]");
                    no_ternary_ = saved;
                    return c;
                }
                list.elts.push_back(std::move(first));
                while (accept_op(",")) {
                    if (at_op("]"))
                        break;
                    list.elts.push_back(parse_test_or_star(true));
                }
            }
            expect_op("]");
            no_ternary_ = saved;
            return make_expr(std::move(list), line);
        }
        if (accept_op("{")) {
            bool saved = no_ternary_;
            no_ternary_ = false;
            auto result = parse_brace_body(line);
            no_ternary_ = saved;
            return result;
        }
        fail("invalid syntax");
    }

    ExprPtr parse_brace_body(int line)
    {
        if (accept_op("}"))
            return make_expr(DictExpr{}, line);
        if (accept_op("**"))
            fail("dict unpacking is not supported by this executor");
        auto first = parse_test();
        if (accept_op(":")) {
            auto value = parse_test();
            if (at_kw("for")) {
                auto c = parse_comprehension(Comprehension::Kind::dict, std::move(value), std::move(first), line);
                expect_op("}");
                return c;
            }
            DictExpr d;
            d.keys.push_back(std::move(first));
            d.values.push_back(std::move(value));
            while (accept_op(",")) {
                if (at_op("}"))
                    break;
                d.keys.push_back(parse_test());
                expect_op(":");
                d.values.push_back(parse_test());
            }
            expect_op("}");
            return make_expr(std::move(d), line);
        }
        if (at_kw("for")) {
            auto c = parse_comprehension(Comprehension::Kind::set, std::move(first), nullptr, line);
            expect_op("}");
            return c;
        }
        SetExpr s;
        s.elts.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_op("}"))
                break;
            s.elts.push_back(parse_test());
        }
        expect_op("}");
        return make_expr(std::move(s), line);
    }

    static Value parse_number(const std::string& text, int line)
    {
        bool is_float = text.find_first_of(".eE") != std::string::npos &&
                        !(text.size() > 1 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'));
        if (is_float) {
            return Value(std::strtod(text.c_str(), nullptr));
        }
        int base = 10;
        std::string_view digits = text;
        if (text.size() > 1 && text[0] == '0' && std::isalpha(static_cast<unsigned char>(text[1]))) {
            char p = static_cast<char>(std::tolower(text[1]));
            base = p == 'x' ? 16 : p == 'o' ? 8 : 2;
            digits.remove_prefix(2);
        }
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
        if (ec == std::errc::result_out_of_range)
            throw SyntaxError("integer literal too large for 64-bit integers", line);
        if (ec != std::errc{} || ptr != digits.data() + digits.size())
            throw SyntaxError("invalid number literal", line);
        return Value(v);
    }

    ExprPtr parse_strings()
    {
        int line = peek().line;
        FString fs;
        bool any_f = false;
        std::string plain;
        while (at(Tok::string)) {
            const Token& t = advance();
            if (t.fstring) {
                any_f = true;
                split_fstring(t.text, t.raw, t.line, fs);
            } else {
                plain += t.text;
                if (fs.parts.empty() || fs.parts.back().expr)
                    fs.parts.push_back(FStringPart{t.text, nullptr, 0, {}});
                else
                    fs.parts.back().literal += t.text;
            }
        }
        if (!any_f)
            return make_expr(Constant{Value(std::move(plain))}, line);
        return make_expr(std::move(fs), line);
    }

    static void split_fstring(const std::string& body, bool raw, int line, FString& out)
    {
        std::string literal;
        auto flush = [&] {
            if (literal.empty())
                return;
            std::string text = raw ? literal : decode_escapes(literal, line);
            if (!out.parts.empty() && !out.parts.back().expr)
                out.parts.back().literal += text;
            else
                out.parts.push_back(FStringPart{std::move(text), nullptr, 0, {}});
            literal.clear();
        };
        for (std::size_t i = 0; i < body.size(); ++i) {
            char c = body[i];
            if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
                literal += '{';
                ++i;
                continue;
            }
            if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
                literal += '}';
                ++i;
                continue;
            }
            if (c == '}')
                throw SyntaxError("f-string: single '}' is not allowed", line);
            if (c != '{') {
                literal += c;
                continue;
            }
            flush();
            // Scan the replacement field.
            std::size_t j = i + 1;
            int depth = 0;
            char quote = 0;
            std::size_t expr_end = std::string::npos, conv_pos = std::string::npos, spec_pos = std::string::npos;
            for (; j < body.size(); ++j) {
                char d = body[j];
                if (quote) {
                    if (d == quote)
                        quote = 0;
                    continue;
                }
                if (d == '\'' || d == '"') {
                    quote = d;
                } else if (d == '(' || d == '[' || d == '{') {
                    ++depth;
                } else if ((d == ')' || d == ']' || (d == '}' && depth > 0))) {
                    --depth;
                } else if (depth == 0 && d == '!' && j + 1 < body.size() && body[j + 1] != '=' &&
                           conv_pos == std::string::npos && spec_pos == std::string::npos) {
                    conv_pos = j;
                    if (expr_end == std::string::npos)
                        expr_end = j;
                } else if (depth == 0 && d == ':' && spec_pos == std::string::npos) {
                    spec_pos = j;
                    if (expr_end == std::string::npos)
                        expr_end = j;
                } else if (depth == 0 && d == '}') {
                    break;
                }
                if (spec_pos != std::string::npos && d == '{')
                    throw SyntaxError("f-string: nested replacement fields are not supported", line);
            }
            if (j >= body.size())
                throw SyntaxError("f-string: expecting '}'", line);
            if (expr_end == std::string::npos)
                expr_end = j;
            FStringPart part;
            std::string expr_text = body.substr(i + 1, expr_end - i - 1);
            if (expr_text.find_first_not_of(" \t") == std::string::npos)
                throw SyntaxError("f-string: empty expression not allowed", line);
            part.expr = parse_expression_text(expr_text, line);
            if (conv_pos != std::string::npos) {
                part.conversion = body[conv_pos + 1];
                if (part.conversion != 'r' && part.conversion != 's' && part.conversion != 'a')
                    throw SyntaxError("f-string: invalid conversion character", line);
            }
            if (spec_pos != std::string::npos)
                part.spec = body.substr(spec_pos + 1, j - spec_pos - 1);
            out.parts.push_back(std::move(part));
            i = j;
        }
        flush();
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int last_line_ = 1;
    bool no_ternary_ = false;
};

ExprPtr parse_expression_text(std::string_view text, int line)
{
    std::string wrapped = "(" + std::string(text) + ")";
    std::vector<Token> tokens;
    try {
        tokens = Lexer(wrapped).run();
    } catch (const SyntaxError& e) {
        throw SyntaxError("f-string: " + e.bare_message(), line);
    }
    for (auto& t : tokens)
        t.line = t.end_line = line;
    Parser p(std::move(tokens));
    return p.parse_lone_expression();
}

}  // namespace

std::shared_ptr<Module> parse_module(std::string_view source)
{
    auto module = std::make_shared<Module>();
    std::string_view rest = source;
    while (true) {
        auto nl = rest.find('\n');
        std::string_view line = rest.substr(0, nl);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        module->lines.emplace_back(line);
        if (nl == std::string_view::npos)
            break;
        rest.remove_prefix(nl + 1);
    }
    Parser parser(Lexer(source).run());
    module->body = parser.parse_file();
    return module;
}

std::string clean_docstring(std::string_view raw)
{
    std::vector<std::string> lines;
    std::string_view rest = raw;
    while (true) {
        auto nl = rest.find('\n');
        std::string line(rest.substr(0, nl));
        // Expand tabs like str.expandtabs().
        std::string expanded;
        for (char c : line) {
            if (c == '\t')
                expanded.append(8 - expanded.size() % 8, ' ');
            else
                expanded += c;
        }
        lines.push_back(std::move(expanded));
        if (nl == std::string_view::npos)
            break;
        rest.remove_prefix(nl + 1);
    }
    std::size_t margin = std::string::npos;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto first = lines[i].find_first_not_of(' ');
        if (first != std::string::npos)
            margin = std::min(margin, first);
    }
    auto lstrip = [](std::string& s) { s.erase(0, std::min(s.find_first_not_of(" \t"), s.size())); };
    lstrip(lines[0]);
    if (margin != std::string::npos)
        for (std::size_t i = 1; i < lines.size(); ++i)
            lines[i] = lines[i].size() >= margin ? lines[i].substr(margin) : std::string{};
    auto blank = [](const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; };
    while (!lines.empty() && blank(lines.back()))
        lines.pop_back();
    while (!lines.empty() && blank(lines.front()))
        lines.erase(lines.begin());
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i)
            out += '\n';
        auto end = lines[i].find_last_not_of(" \t\r");
        out += end == std::string::npos ? std::string{} : lines[i].substr(0, end + 1);
    }
    return out;
}

}  // namespace dynact::minipy
