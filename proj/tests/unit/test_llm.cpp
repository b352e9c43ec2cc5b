#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "dynact/library.hpp"
#include "dynact/llm.hpp"
#include "dynact/serialize.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

using namespace dynact;
namespace fs = std::filesystem;

namespace {

// Serves one canned response on a random local port for the lifetime of the
// object.
class StubServer {
public:
    StubServer(int status, std::string body)
    {
        server_.Post("/v1/chat/completions", [status, body, this](const httplib::Request& req, httplib::Response& res) {
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            res.status = status;
            res.set_content(body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer()
    {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

    std::string last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

ActionRecord catalog_record(const PluginInfo& p)
{
    ActionRecord r;
    r.name = p.name;
    r.docstring = p.description;
    r.source = "def " + p.name + "(*args):\n    \"\"\"" + p.description + "\"\"\"\n    pass";
    r.origin = Origin::human;
    return r;
}

}  // namespace

TEST_SUITE("llm")
{
    TEST_CASE("parse_response extracts thought and the first fenced block")
    {
        auto p = parse_response("I will compute X.\n```\nprint(1)\n```");
        CHECK(p.thought == "I will compute X.");
        REQUIRE(p.code);
        CHECK(*p.code == "print(1)");

        auto none = parse_response("no code here");
        CHECK(none.thought == "no code here");
        CHECK_FALSE(none.code);

        auto two = parse_response("First.\n```python\na = 1\n```\nThen.\n```python\nb = 2\n```\n");
        REQUIRE(two.code);
        CHECK(*two.code == "a = 1");
        CHECK(two.thought == "First.");

        auto unterminated = parse_response("Start.\n```python\nx = 1\n");
        CHECK_FALSE(unterminated.code);
        CHECK(unterminated.thought == "Start.\n```python\nx = 1");

        auto crlf = parse_response("T\r\n```py\r\nx = 1\r\ny = 2\r\n```\r\n");
        REQUIRE(crlf.code);
        CHECK(*crlf.code == "x = 1\ny = 2");
    }

    TEST_CASE("render_assistant_turn parses back to the same pair")
    {
        auto text = render_assistant_turn("Compute it.", "print(2 + 2)");
        auto p = parse_response(text);
        CHECK(p.thought == "Compute it.");
        CHECK(p.code == std::optional<std::string>("print(2 + 2)"));
    }

    TEST_CASE("system prompt lists actions with their descriptions")
    {
        auto builtins = builtin_actions();
        auto prompt = build_system_prompt({builtins[0]});
        CHECK(prompt.find("submit_final_answer") != std::string::npos);
        CHECK(prompt.find("Submits the final answer to the given problem.") != std::string::npos);

        auto empty = build_system_prompt({});
        CHECK(empty.find("## Available actions") != std::string::npos);
        CHECK(empty.find("```python") != std::string::npos);
        CHECK(empty.find("submit_final_answer(") != std::string::npos);  // format instructions stay intact

        std::vector<ActionRecord> all;
        for (const auto& p : initial_action_catalog())
            all.push_back(catalog_record(p));
        REQUIRE(all.size() == 13);
        auto full = build_system_prompt(all);
        std::size_t last = full.find("## Available actions");
        for (const auto& r : all) {
            auto pos = full.find("### " + r.name + "\n");
            REQUIRE_MESSAGE(pos != std::string::npos, r.name);
            CHECK(pos > last);
            last = pos;
        }

        ActionRecord undocumented = all[0];
        undocumented.docstring = "  ";
        CHECK_THROWS_AS(build_system_prompt({undocumented}), PromptError);
    }

    TEST_CASE("action signatures flatten the parameter list")
    {
        ActionRecord r;
        r.name = "download_file";
        r.source = "def download_file(url,\n                  file_path=None):\n    pass";
        CHECK(action_signature(r) == "download_file(url, file_path=None)");
    }

    TEST_CASE("scripted provider replays and reports exhaustion")
    {
        ScriptedProvider p({{{"T1", 1}, "first"}, {{"T1", 2}, "second"}});
        CHECK(p.complete({}, {"T1", 1}) == "first");
        CHECK(p.complete({}, {"T1", 1}) == "first");
        CHECK(p.complete({}, {"T1", 2}) == "second");
        CHECK_THROWS_AS(p.complete({}, {"T1", 3}), TranscriptExhausted);
        CHECK_THROWS_AS(p.complete({}, {"T2", 1}), TranscriptExhausted);
    }

    TEST_CASE("scripted transcripts are read from JSONL")
    {
        auto dir = fs::temp_directory_path() / "dynact_llm_transcript";
        fs::create_directories(dir);
        {
            std::ofstream out(dir / "t.jsonl");
            out << R"({"task_id":"a","step":1,"response":"hello"})" << "\n\n";
            out << R"({"task_id":"a","step":2,"response":"bye"})" << "\n";
        }
        ScriptedProvider p(dir / "t.jsonl");
        CHECK(p.size() == 2);
        CHECK(p.complete({}, {"a", 2}) == "bye");
        {
            std::ofstream out(dir / "bad.jsonl");
            out << "{\"task_id\":\"a\"}\n";
        }
        CHECK_THROWS_AS(ScriptedProvider(dir / "bad.jsonl"), ConfigError);
        fs::remove_all(dir);
    }

    TEST_CASE("http provider sends the conversation and reads the reply")
    {
        StubServer server(200, R"({"choices":[{"message":{"role":"assistant","content":"Thought.\n```\nprint(1)\n```"}}]})");
        ProviderConfig cfg;
        cfg.kind = ProviderKind::http_chat;
        cfg.endpoint_url = server.url();
        cfg.api_key_env = "DYNACT_TEST_KEY";
        setenv("DYNACT_TEST_KEY", "secret", 1);
        auto p = make_provider(cfg);
        auto text = p->complete({{Role::system, "sys"}, {Role::user, "hi"}}, {"t", 1});
        CHECK(text.find("print(1)") != std::string::npos);
        auto body = Json::parse(server.last_body);
        CHECK(body["model"] == "gpt-4o");
        CHECK(body["temperature"] == 0.5);
        CHECK(body["messages"].size() == 2);
        CHECK(body["messages"][0]["role"] == "system");
        CHECK(server.last_auth == "Bearer secret");
        unsetenv("DYNACT_TEST_KEY");
    }

    TEST_CASE("http provider surfaces server errors with their status")
    {
        StubServer server(500, R"({"error":"boom"})");
        ProviderConfig cfg;
        cfg.kind = ProviderKind::http_chat;
        cfg.endpoint_url = server.url();
        HttpChatProvider p(cfg);
        try {
            p.complete({{Role::user, "hi"}}, {"t", 1});
            FAIL("expected ProviderError");
        } catch (const ProviderError& e) {
            CHECK(e.status() == 500);
        }
    }

    TEST_CASE("provider configuration is validated")
    {
        ProviderConfig http;
        http.kind = ProviderKind::http_chat;
        CHECK_THROWS_AS(validate_provider_config(http), ConfigError);
        ProviderConfig scripted;
        CHECK_THROWS_AS(validate_provider_config(scripted), ConfigError);
    }

    TEST_CASE("recording provider appends every exchange")
    {
        auto path = fs::temp_directory_path() / "dynact_record.jsonl";
        fs::remove(path);
        RecordingProvider rec(std::make_unique<ScriptedProvider>(std::map<std::pair<std::string, int>, std::string>{
                                  {{"x", 1}, "one"}, {{"x", 2}, "two"}}),
                              path);
        rec.complete({{Role::user, "q"}}, {"x", 1});
        rec.complete({{Role::user, "q"}}, {"x", 2});
        ScriptedProvider replay(path);
        CHECK(replay.complete({}, {"x", 1}) == "one");
        CHECK(replay.complete({}, {"x", 2}) == "two");
        fs::remove(path);
    }
}
