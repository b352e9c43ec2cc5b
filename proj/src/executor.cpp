#include "dynact/executor.hpp"
#include "dynact/minipy.hpp"

#include <fmt/format.h>

namespace dynact {

std::string_view to_string(Op op)
{
    switch (op) {
    case Op::exec: return "exec";
    case Op::analyze: return "analyze";
    case Op::load: return "load";
    case Op::reset: return "reset";
    case Op::ping: return "ping";
    case Op::shutdown: return "shutdown";
    }
    return "exec";
}

Op op_from_string(std::string_view text)
{
    for (Op op : {Op::exec, Op::analyze, Op::load, Op::reset, Op::ping, Op::shutdown})
        if (to_string(op) == text)
            return op;
    throw Error(fmt::format("unknown op '{}'", text));
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

void to_json(Json& j, const ExecRequest& r)
{
    j = Json{{"id", r.id}, {"op", to_string(r.op)}, {"timeout_s", r.timeout_s}};
    if (r.code)
        j["code"] = *r.code;
}

void from_json(const Json& j, ExecRequest& r)
{
    r.id = j.at("id").get<std::string>();
    r.op = op_from_string(j.at("op").get<std::string>());
    r.code.reset();
    if (auto it = j.find("code"); it != j.end() && it->is_string())
        r.code = it->get<std::string>();
    r.timeout_s = j.value("timeout_s", 120);
    if ((r.op == Op::exec || r.op == Op::analyze || r.op == Op::load) && !r.code)
        throw Error(fmt::format("op '{}' requires code", to_string(r.op)));
}

void to_json(Json& j, const ExecErrorInfo& e)
{
    j = Json{{"type", e.type}, {"message", e.message}, {"traceback", e.traceback}};
}

void from_json(const Json& j, ExecErrorInfo& e)
{
    e.type = j.value("type", std::string{"Error"});
    e.message = j.value("message", std::string{});
    e.traceback = j.value("traceback", std::string{});
}

void to_json(Json& j, const DefinedFunction& f)
{
    j = Json{{"name", f.name}, {"docstring", f.docstring}, {"source", f.source}, {"complexity", f.complexity}};
}

void from_json(const Json& j, DefinedFunction& f)
{
    f.name = j.at("name").get<std::string>();
    f.docstring = j.value("docstring", std::string{});
    f.source = j.value("source", std::string{});
    f.complexity = j.value("complexity", 1);
}

void to_json(Json& j, const ExecResult& r)
{
    j = Json{{"id", r.id},
             {"ok", r.ok},
             {"stdout", r.stdout_text},
             {"result_repr", r.result_repr ? Json(*r.result_repr) : Json(nullptr)},
             {"final_answer", r.final_answer ? Json(*r.final_answer) : Json(nullptr)},
             {"error", r.error ? Json(*r.error) : Json(nullptr)},
             {"defined_functions", r.defined_functions}};
}

void from_json(const Json& j, ExecResult& r)
{
    r = ExecResult{};
    r.id = j.at("id").get<std::string>();
    r.ok = j.value("ok", false);
    r.stdout_text = j.value("stdout", std::string{});
    if (auto it = j.find("result_repr"); it != j.end() && it->is_string())
        r.result_repr = it->get<std::string>();
    if (auto it = j.find("final_answer"); it != j.end() && it->is_string())
        r.final_answer = it->get<std::string>();
    if (auto it = j.find("error"); it != j.end() && it->is_object())
        r.error = it->get<ExecErrorInfo>();
    if (auto it = j.find("defined_functions"); it != j.end() && it->is_array())
        r.defined_functions = it->get<std::vector<DefinedFunction>>();
    if (!r.ok && !r.error)
        r.error = ExecErrorInfo{"ProtocolError", "worker reported failure without an error object", ""};
    if (!r.ok)
        r.defined_functions.clear();
}

void to_json(Json& j, const RetrievalHit& h)
{
    j = Json{{"name", h.name}, {"docstring", h.docstring}, {"source", h.source}, {"score", h.score}};
}

void from_json(const Json& j, RetrievalHit& h)
{
    h.name = j.at("name").get<std::string>();
    h.docstring = j.value("docstring", std::string{});
    h.source = j.value("source", std::string{});
    h.score = j.value("score", 0.0);
}

std::string encode_line(const Json& j)
{
    // dump() escapes control characters, so the line never embeds a newline.
    return j.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n";
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

bool is_framework_hook(const std::string& name)
{
    return name == "submit_final_answer" || name == "get_relevant_actions";
}

std::vector<std::string> split_command(const std::string& command)
{
    std::vector<std::string> out;
    std::string cur;
    bool have = false;
    char quote = 0;
    for (std::size_t i = 0; i < command.size(); ++i) {
        char c = command[i];
        if (quote) {
            if (c == quote)
                quote = 0;
            else if (c == '\\' && quote == '"' && i + 1 < command.size())
                cur += command[++i];
            else
                cur += c;
        } else if (c == '\'' || c == '"') {
            quote = c;
            have = true;
        } else if (c == ' ' || c == '\t' || c == '\n') {
            if (have)
                out.push_back(std::move(cur));
            cur.clear();
            have = false;
        } else {
            if (c == '\\' && i + 1 < command.size())
                c = command[++i];
            cur += c;
            have = true;
        }
    }
    if (quote)
        throw Error("unterminated quote in command");
    if (have)
        out.push_back(std::move(cur));
    return out;
}

namespace {

std::size_t count_code_points(std::string_view s)
{
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80)
            ++n;
    return n;
}

// Byte offset just past the first `n` code points.
std::size_t prefix_bytes(std::string_view s, std::size_t n)
{
    std::size_t seen = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
            if (seen == n)
                return i;
            ++seen;
        }
    }
    return s.size();
}

std::string last_lines(const std::string& text, std::size_t n)
{
    std::size_t pos = text.size();
    if (pos > 0 && text[pos - 1] == '\n')
        --pos;
    std::size_t count = 0;
    while (pos > 0) {
        auto nl = text.rfind('\n', pos - 1);
        if (nl == std::string::npos)
            return text;
        if (++count == n)
            return text.substr(nl + 1);
        pos = nl;
    }
    return text;
}

}  // namespace

std::string to_observation(const ExecResult& res, std::size_t limit_chars)
{
    std::string text;
    if (res.ok) {
        text = res.stdout_text;
        if (res.result_repr) {
            if (!text.empty() && text.back() != '\n')
                text += '\n';
            text += *res.result_repr;
        }
        if (text.empty())
            text = "(no output)";
    } else {
        const auto& err = res.error ? *res.error : ExecErrorInfo{"Error", "execution failed", ""};
        text = err.message.empty() ? err.type + ":" : fmt::format("{}: {}", err.type, err.message);
        if (!err.traceback.empty())
            text += "\n" + last_lines(err.traceback, 20);
        if (!res.stdout_text.empty())
            text += "\nOutput before the error:\n" + res.stdout_text;
    }
    if (res.session_reset)
        text += "\n[session restarted: all variables and loaded actions except the initial ones were cleared]";

    std::size_t total = count_code_points(text);
    if (total <= limit_chars)
        return text;
    std::string out = text.substr(0, prefix_bytes(text, limit_chars));
    out += fmt::format("...[truncated {} chars]", total - limit_chars);
    return out;
}

// ---------------------------------------------------------------------------
// In-process executor
// ---------------------------------------------------------------------------

namespace {

ExecResult from_outcome(minipy::Outcome o)
{
    ExecResult r;
    r.ok = o.ok;
    r.stdout_text = std::move(o.stdout_text);
    r.result_repr = std::move(o.result_repr);
    r.final_answer = std::move(o.final_answer);
    if (o.error)
        r.error = ExecErrorInfo{o.error->type, o.error->message, o.error->traceback};
    for (auto& f : o.defined_functions)
        r.defined_functions.push_back(DefinedFunction{f.name, f.docstring, f.source, f.complexity});
    return r;
}

class MockExecutor final : public Executor {
public:
    explicit MockExecutor(std::vector<ActionRecord> human)
        : human_(std::move(human)), interp_(minipy::Hooks{[this](const std::string& q, std::optional<std::int64_t> k) {
              return on_retrieve(q, k);
          }})
    {
        load_human_actions();
    }

    ExecResult execute(const std::string& code, int timeout_s) override
    {
        auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(timeout_s);
        ExecResult r = from_outcome(interp_.exec(code, deadline, true));
        if (r.error && (r.error->type == "Timeout" || r.error->type == "WorkerCrashed")) {
            if (r.error->type == "Timeout")
                r.error->message = fmt::format("execution exceeded the time limit of {} s", timeout_s);
            restart();
            r.session_reset = true;
        }
        return r;
    }

    ExecResult load(const std::string& code) override
    {
        auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
        ExecResult r = from_outcome(interp_.exec(code, deadline, false));
        r.final_answer.reset();
        return r;
    }

    AnalyzeResult analyze(const std::string& code) override
    {
        AnalyzeResult out;
        try {
            auto a = minipy::analyze(code);
            for (auto& f : a.functions)
                out.functions.push_back(DefinedFunction{f.name, f.docstring, f.source, f.complexity});
            out.definitions = std::move(a.all_definitions);
            out.calls = std::move(a.call_targets);
        } catch (const minipy::SyntaxError& e) {
            out.ok = false;
            out.error = ExecErrorInfo{"SyntaxError", e.what(), ""};
        }
        return out;
    }

    void reset() override { restart(); }

    void set_retrieval_handler(RetrievalHandler handler) override { handler_ = std::move(handler); }

    void shutdown() override {}

private:
    std::string on_retrieve(const std::string& query, std::optional<std::int64_t> k)
    {
        if (!handler_)
            throw Error("no retrieval handler is attached to this session");
        std::optional<int> kk;
        if (k)
            kk = static_cast<int>(*k);
        return handler_(query, kk).text;
    }

    void restart()
    {
        interp_.reset();
        load_human_actions();
    }

    void load_human_actions()
    {
        for (const auto& a : human_) {
            if (is_framework_hook(a.name))
                continue;
            auto r = load(a.source);
            if (!r.ok)
                throw Error(fmt::format("failed to load human action {}: {}", a.name, r.error->message));
        }
    }

    std::vector<ActionRecord> human_;
    RetrievalHandler handler_;
    minipy::Interpreter interp_;
};

}  // namespace

std::unique_ptr<Executor> start_mock_session(const std::vector<ActionRecord>& human_actions)
{
    return std::make_unique<MockExecutor>(human_actions);
}

}  // namespace dynact
