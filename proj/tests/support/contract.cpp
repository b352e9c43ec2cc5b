#include "contract.hpp"

#include "dynact/library.hpp"

#include <chrono>
#include <stdexcept>

#include <fmt/format.h>

using namespace dynact;

namespace contract {

namespace {

struct Failed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& what)
{
    if (!cond)
        throw Failed(what);
}

std::string describe(const ExecResult& r)
{
    return fmt::format("ok={} stdout={} error={}", r.ok, r.stdout_text,
                       r.error ? r.error->type + ": " + r.error->message : "none");
}

const char* pdf_listing = R"(def extract_text_from_pdf(file_path: str) -> str:
    """Extract text from a PDF file."""
    text = ''
    with fitz.open(file_path) as pdf:
        for page in pdf:
            text += page.get_text()
    return text
)";

using Check = std::function<void(const Factory&)>;

void state_persists(const Factory& start)
{
    auto ex = start(builtin_actions());
    auto a = ex->execute("x = 41", 10);
    expect(a.ok, "assignment failed: " + describe(a));
    auto b = ex->execute("print(x + 1)", 10);
    expect(b.ok && b.stdout_text == "42\n", "second step did not see x: " + describe(b));
    ex->shutdown();
}

void simple_exec(const Factory& start)
{
    auto ex = start(builtin_actions());
    auto r = ex->execute("x = 1\nprint(x+1)", 10);
    expect(r.ok, describe(r));
    expect(r.stdout_text == "2\n", "stdout was " + r.stdout_text);
    expect(r.defined_functions.empty(), "unexpected defined functions");
    expect(!r.final_answer, "unexpected final answer");
    expect(to_observation(r, 8192) == "2\n", "observation was " + to_observation(r, 8192));
    ex->shutdown();
}

void reports_defined_function(const Factory& start)
{
    auto ex = start(builtin_actions());
    auto r = ex->execute(pdf_listing, 10);
    expect(r.ok, describe(r));
    expect(r.stdout_text.empty(), "expected no output");
    expect(r.defined_functions.size() == 1, fmt::format("{} functions reported", r.defined_functions.size()));
    const auto& f = r.defined_functions[0];
    expect(f.name == "extract_text_from_pdf", "name " + f.name);
    expect(f.docstring == "Extract text from a PDF file.", "docstring " + f.docstring);
    expect(f.complexity == 2, fmt::format("complexity {}", f.complexity));
    expect(f.source.rfind("def extract_text_from_pdf(", 0) == 0, "source " + f.source);

    auto g = ex->execute("def f(x):\n    \"\"\"doc\"\"\"\n    return x", 10);
    expect(g.ok && g.defined_functions.size() == 1, describe(g));
    expect(g.defined_functions[0].name == "f" && g.defined_functions[0].docstring == "doc" &&
               g.defined_functions[0].complexity == 1,
           "f was reported incorrectly");
    ex->shutdown();
}

void final_answer_hook(const Factory& start)
{
    auto ex = start(builtin_actions());
    auto r = ex->execute("submit_final_answer(\"42\")", 10);
    expect(r.ok, describe(r));
    expect(r.final_answer == std::optional<std::string>("42"), "final answer missing");
    auto next = ex->execute("print('after')", 10);
    expect(next.ok && !next.final_answer, "final answer leaked into the next step");
    ex->shutdown();
}

void structured_traceback(const Factory& start)
{
    auto ex = start(builtin_actions());
    auto r = ex->execute("print('before')\n1 / 0", 10);
    expect(!r.ok, "division by zero succeeded");
    expect(r.error && r.error->type == "ZeroDivisionError", describe(r));
    expect(r.error->traceback.find("ZeroDivisionError") != std::string::npos, "traceback lacks the error type");
    expect(r.stdout_text == "before\n", "stdout before the error was lost");
    auto obs = to_observation(r, 8192);
    expect(obs.rfind("ZeroDivisionError:", 0) == 0, "observation " + obs);
    auto name = ex->execute("undefined_name", 10);
    expect(!name.ok && name.error && name.error->type == "NameError", describe(name));
    expect(to_observation(name, 8192).rfind("NameError:", 0) == 0, "NameError observation");
    ex->shutdown();
}

void timeout_restarts(const Factory& start)
{
    auto ex = start(builtin_actions());
    ex->execute("x = 5", 10);
    auto t0 = std::chrono::steady_clock::now();
    auto r = ex->execute("while True: pass", 2);
    auto elapsed = std::chrono::steady_clock::now() - t0;
    expect(!r.ok && r.error && r.error->type == "Timeout", describe(r));
    expect(r.session_reset, "session_reset not reported");
    expect(elapsed < std::chrono::seconds(8), "timeout took too long");
    auto after = ex->execute("x", 10);
    expect(!after.ok && after.error && after.error->type == "NameError", "namespace survived the timeout");
    auto hook = ex->execute("submit_final_answer(1)", 10);
    expect(hook.ok && hook.final_answer == std::optional<std::string>("1"), "terminal action unusable after restart");
    ex->shutdown();
}

void reset_clears(const Factory& start)
{
    auto ex = start(builtin_actions());
    ex->execute("x = 3", 10);
    ex->reset();
    auto r = ex->execute("x", 10);
    expect(!r.ok && r.error && r.error->type == "NameError", "x survived reset: " + describe(r));
    ex->reset();
    ex->reset();
    auto hook = ex->execute("submit_final_answer('done')", 10);
    expect(hook.ok && hook.final_answer == std::optional<std::string>("done"), describe(hook));
    ex->shutdown();
}

void human_actions_preloaded(const Factory& start)
{
    auto human = builtin_actions();
    for (auto& p : shipped_plugins())
        human.push_back(p);
    auto ex = start(human);
    auto r = ex->execute("print(callable(download_file), callable(inspect_file_as_text))", 10);
    expect(r.ok && r.stdout_text == "True True\n", describe(r));
    ex->reset();
    auto again = ex->execute("print(callable(inspect_file_as_text))", 10);
    expect(again.ok && again.stdout_text == "True\n", "plugin lost after reset: " + describe(again));
    ex->shutdown();
}

void load_semantics(const Factory& start)
{
    auto ex = start(builtin_actions());
    std::string src;
    for (const auto& p : shipped_plugins())
        if (p.name == "download_file")
            src = p.source;
    expect(!src.empty(), "download_file source unavailable");
    auto a = ex->load(src);
    expect(a.ok, "load failed: " + describe(a));
    auto b = ex->load(src);
    expect(b.ok, "second load failed: " + describe(b));
    auto c = ex->execute("print(callable(download_file))", 10);
    expect(c.ok && c.stdout_text == "True\n", describe(c));
    auto bad = ex->load("def broken(:\n    pass");
    expect(!bad.ok && bad.error && bad.error->type == "SyntaxError", describe(bad));
    ex->shutdown();
}

void analyze_reports_structure(const Factory& start)
{
    auto ex = start(builtin_actions());
    auto a = ex->analyze("def helper(x):\n    \"\"\"Help.\"\"\"\n    return len(x)\nsq = lambda n: n * n\n"
                         "submit_final_answer(helper(os.path.basename('a/b')))");
    expect(a.ok, "analysis failed");
    expect(a.functions.size() == 1 && a.functions[0].name == "helper", "top-level functions");
    bool has_lambda = false, has_helper = false;
    for (const auto& d : a.definitions) {
        has_lambda |= d == "<lambda>";
        has_helper |= d == "helper";
    }
    expect(has_lambda && has_helper, "definitions incomplete");
    auto has_call = [&](const std::string& c) {
        for (const auto& x : a.calls)
            if (x == c)
                return true;
        return false;
    };
    expect(has_call("submit_final_answer") && has_call("helper") && has_call("os.path.basename") && has_call("len"),
           "calls incomplete");
    auto bad = ex->analyze("def (");
    expect(!bad.ok && bad.error && bad.error->type == "SyntaxError", "syntax error not reported");
    ex->shutdown();
}

void retrieval_callback(const Factory& start)
{
    auto ex = start(builtin_actions());
    std::string seen_query;
    std::optional<int> seen_k;
    ex->set_retrieval_handler([&](const std::string& q, std::optional<int> k) {
        seen_query = q;
        seen_k = k;
        CallbackReply reply;
        reply.results.push_back({"mul", "Multiply.", "def mul(a, b):\n    \"\"\"Multiply.\"\"\"\n    return a * b", 1.0});
        reply.text = "found mul";
        return reply;
    });
    auto r = ex->execute("get_relevant_actions('multiply two numbers', 2)\nprint('next')", 10);
    expect(r.ok, describe(r));
    expect(seen_query == "multiply two numbers" && seen_k == std::optional<int>(2), "handler saw wrong arguments");
    expect(r.stdout_text == "found mul\nnext\n", "stdout " + r.stdout_text);
    auto d = ex->execute("get_relevant_actions(query='x')", 10);
    expect(d.ok && !seen_k, "k should be absent when omitted");
    ex->set_retrieval_handler([](const std::string&, std::optional<int>) -> CallbackReply {
        throw Error("index unavailable");
    });
    auto e = ex->execute("get_relevant_actions('q')", 10);
    expect(!e.ok && e.error && e.error->type == "RuntimeError", "handler failure not surfaced: " + describe(e));
    ex->shutdown();
}

void crash_recovers(const Factory& start)
{
    auto ex = start(builtin_actions());
    ex->execute("y = 2", 10);
    auto r = ex->execute("import os\nos._exit(3)", 10);
    expect(!r.ok && r.error && r.error->type == "WorkerCrashed", describe(r));
    expect(r.session_reset, "session_reset not reported after crash");
    auto after = ex->execute("print('alive')", 10);
    expect(after.ok && after.stdout_text == "alive\n", "session unusable after crash: " + describe(after));
    ex->shutdown();
}

void observation_truncation(const Factory& start)
{
    auto ex = start(builtin_actions());
    auto r = ex->execute("print('x' * 100000)", 10);
    expect(r.ok, describe(r));
    auto obs = to_observation(r, 8192);
    std::string suffix = "...[truncated 91809 chars]";
    expect(obs.size() == 8192 + suffix.size(), fmt::format("observation length {}", obs.size()));
    expect(obs.substr(8192) == suffix, "suffix " + obs.substr(8192));
    ex->shutdown();
}

}  // namespace

std::vector<CheckResult> run_executor_contract(const Factory& start)
{
    const std::vector<std::pair<std::string, Check>> checks = {
        {"state persists across steps", state_persists},
        {"plain execution", simple_exec},
        {"defined functions reported", reports_defined_function},
        {"final answer hook", final_answer_hook},
        {"structured tracebacks", structured_traceback},
        {"timeout kills and restarts", timeout_restarts},
        {"reset clears the namespace", reset_clears},
        {"human actions preloaded", human_actions_preloaded},
        {"load semantics", load_semantics},
        {"static analysis", analyze_reports_structure},
        {"retrieval callback", retrieval_callback},
        {"crash recovery", crash_recovers},
        {"observation truncation", observation_truncation},
    };
    std::vector<CheckResult> out;
    for (const auto& [name, check] : checks) {
        try {
            check(start);
            out.push_back({name, true, ""});
        } catch (const Failed& f) {
            out.push_back({name, false, f.what()});
        } catch (const std::exception& e) {
            out.push_back({name, false, std::string("exception: ") + e.what()});
        }
    }
    return out;
}

}  // namespace contract
