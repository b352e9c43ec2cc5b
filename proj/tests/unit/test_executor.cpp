#include "dynact/executor.hpp"
#include "dynact/serialize.hpp"
#include "dynact/library.hpp"

#include "../support/contract.hpp"

#include <doctest.h>

#include <chrono>
#include <sstream>

using namespace dynact;

namespace {

std::vector<std::string> fixture_worker(const std::string& mode = "")
{
    std::vector<std::string> cmd{DYNACT_FIXTURE_WORKER};
    if (!mode.empty())
        cmd.push_back(mode);
    return cmd;
}

void check_contract(const contract::Factory& factory)
{
    for (const auto& r : contract::run_executor_contract(factory)) {
        INFO(r.name << ": " << r.detail);
        CHECK(r.passed);
    }
}

std::vector<Json> run_worker(const std::string& input, int& code)
{
    std::istringstream in(input);
    std::ostringstream out;
    code = serve_worker(in, out);
    std::vector<Json> lines;
    std::istringstream parsed(out.str());
    std::string line;
    while (std::getline(parsed, line))
        lines.push_back(Json::parse(line));
    return lines;
}

}  // namespace

TEST_SUITE("executor")
{
    TEST_CASE("contract: in-process executor")
    {
        check_contract([](const std::vector<ActionRecord>& human) { return start_mock_session(human); });
    }

    TEST_CASE("contract: subprocess executor over the wire protocol")
    {
        check_contract([](const std::vector<ActionRecord>& human) {
            return start_subprocess_session(fixture_worker(), human);
        });
    }

    TEST_CASE("spawn failures")
    {
        CHECK_THROWS_AS(start_subprocess_session({"/nonexistent/dynact-worker"}, builtin_actions()), WorkerSpawnError);
        CHECK_THROWS_AS(start_subprocess_session({}, builtin_actions()), WorkerSpawnError);
        CHECK_THROWS_AS(start_subprocess_session(fixture_worker("wrong-version"), builtin_actions()),
                        WorkerSpawnError);
        CHECK_THROWS_AS(start_subprocess_session(fixture_worker("exit-at-start"), builtin_actions(),
                                                 std::chrono::milliseconds(2000)),
                        WorkerSpawnError);
    }

    TEST_CASE("a worker that never answers the handshake times out")
    {
        CHECK(default_handshake_timeout == std::chrono::seconds(10));
        auto t0 = std::chrono::steady_clock::now();
        CHECK_THROWS_AS(start_subprocess_session(fixture_worker("silent"), builtin_actions(),
                                                 std::chrono::milliseconds(300)),
                        HandshakeTimeout);
        CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(3));
    }

    TEST_CASE("non-JSON worker output is a protocol error")
    {
        auto ex = start_subprocess_session(fixture_worker("garbage-after-ping"), builtin_actions());
        auto r = ex->execute("print(1)", 5);
        CHECK_FALSE(r.ok);
        REQUIRE(r.error);
        CHECK(r.error->type == "ProtocolError");
        ex->shutdown();
    }

    TEST_CASE("worker protocol: ping, exec, analyze, shutdown")
    {
        int code = -1;
        auto lines = run_worker(
            R"j({"id":"1","op":"ping"})j"
            "\n"
            R"j({"id":"2","op":"exec","code":"def f(x):\n    \"\"\"doc\"\"\"\n    return x\nprint(f(3))","timeout_s":5})j"
            "\n"
            R"j({"id":"3","op":"analyze","code":"g = lambda: h(1)"})j"
            "\n"
            R"j({"id":"4","op":"exec","code":"1/0","timeout_s":5})j"
            "\n"
            R"j({"id":"5","op":"shutdown"})j"
            "\n"
            R"j({"id":"6","op":"ping"})j"
            "\n",
            code);
        CHECK(code == 0);
        REQUIRE(lines.size() == 5);  // nothing after shutdown
        CHECK(lines[0] == Json{{"id", "1"}, {"ok", true}, {"v", 1}});
        CHECK(lines[1]["stdout"] == "3\n");
        CHECK(lines[1]["defined_functions"][0]["name"] == "f");
        CHECK(lines[1]["defined_functions"][0]["complexity"] == 1);
        CHECK(lines[2]["definitions"] == Json::array({"<lambda>"}));
        CHECK(lines[2]["calls"] == Json::array({"h"}));
        CHECK(lines[3]["ok"] == false);
        CHECK(lines[3]["error"]["type"] == "ZeroDivisionError");
        CHECK(lines[4]["id"] == "5");
    }

    TEST_CASE("worker protocol: retrieval callbacks interleave with the request")
    {
        int code = -1;
        auto lines = run_worker(
            R"j({"id":"7","op":"exec","code":"get_relevant_actions('sum numbers', 3)","timeout_s":5})j"
            "\n"
            R"j({"id":"cb1","results":[{"name":"add","docstring":"Add.","source":"def add(a, b): return a + b","score":0.9}]})j"
            "\n"
            R"j({"id":"8","op":"exec","code":"get_relevant_actions('x')","timeout_s":5})j"
            "\n"
            R"j({"id":"cb2","results":[],"text":"No relevant actions found for \"x\"."})j"
            "\n",
            code);
        REQUIRE(lines.size() == 4);
        CHECK(lines[0] == Json{{"op", "callback"}, {"id", "cb1"}, {"kind", "retrieve"}, {"query", "sum numbers"}, {"k", 3}});
        CHECK(lines[1]["id"] == "7");
        CHECK(lines[1]["ok"] == true);
        CHECK(lines[1]["stdout"].get<std::string>().find("# add (score 0.9000)") != std::string::npos);
        CHECK(lines[2]["k"].is_null());
        CHECK(lines[3]["stdout"] == "No relevant actions found for \"x\".\n");
    }

    TEST_CASE("worker protocol: crash exits without a reply, malformed input is answered")
    {
        int code = -1;
        auto lines = run_worker(R"j({"id":"x","op":"bogus"})j"
                                "\n"
                                R"j({"id":"9","op":"exec","code":"import os\nos._exit(4)","timeout_s":5})j"
                                "\n",
                                code);
        CHECK(code == 4);
        REQUIRE(lines.size() == 1);
        CHECK(lines[0]["id"] == "x");
        CHECK(lines[0]["error"]["type"] == "ProtocolError");
    }

    TEST_CASE("wire types round trip and enforce their invariants")
    {
        ExecResult r;
        r.id = "42";
        r.ok = false;
        r.stdout_text = "partial";
        r.error = ExecErrorInfo{"ValueError", "bad", "Traceback..."};
        r.defined_functions.push_back({"f", "doc", "def f(): pass", 1});
        auto back = Json(r).get<ExecResult>();
        CHECK(back.id == "42");
        CHECK_FALSE(back.ok);
        CHECK(back.error == r.error);
        CHECK(back.defined_functions.empty());  // failed steps define nothing

        ExecResult good;
        good.id = "43";
        good.defined_functions.push_back({"f", "doc", "def f(): pass", 1});
        CHECK(Json(good).get<ExecResult>().defined_functions == good.defined_functions);

        auto line = encode_line(Json(r));
        CHECK(line.back() == '\n');
        CHECK(line.find('\n') == line.size() - 1);

        ExecRequest req{"1", Op::load, std::string("x = 1"), 30};
        auto rb = Json(req).get<ExecRequest>();
        CHECK(rb.op == Op::load);
        CHECK(rb.code == req.code);
        CHECK(op_from_string("shutdown") == Op::shutdown);
        CHECK_THROWS(op_from_string("dance"));
    }

    TEST_CASE("observations")
    {
        ExecResult ok;
        ok.stdout_text = "2\n";
        CHECK(to_observation(ok, 8192) == "2\n");
        ExecResult empty;
        CHECK(to_observation(empty, 8192) == "(no output)");
        ExecResult val;
        val.stdout_text = "a";
        val.result_repr = "3";
        CHECK(to_observation(val, 8192) == "a\n3");

        ExecResult err;
        err.ok = false;
        err.error = ExecErrorInfo{"NameError", "name 'y' is not defined", "Traceback\n  line 1\nNameError"};
        auto obs = to_observation(err, 8192);
        CHECK(obs.rfind("NameError: name 'y' is not defined", 0) == 0);

        ExecResult big;
        big.stdout_text = std::string(100000, 'x');
        auto cut = to_observation(big, 8192);
        CHECK(cut == std::string(8192, 'x') + "...[truncated 91808 chars]");

        ExecResult wide;
        wide.stdout_text = "ééééé";  // five code points, ten bytes
        CHECK(to_observation(wide, 3) == "ééé...[truncated 2 chars]");

        ExecResult restarted = err;
        restarted.session_reset = true;
        CHECK(to_observation(restarted, 8192).find("session restarted") != std::string::npos);
    }

    TEST_CASE("command splitting honours quotes")
    {
        CHECK(split_command("python3 -m dynact_worker") == std::vector<std::string>{"python3", "-m", "dynact_worker"});
        CHECK(split_command("\"/opt/my tools/w\" --flag 'a b'") ==
              std::vector<std::string>{"/opt/my tools/w", "--flag", "a b"});
        CHECK(split_command("   ").empty());
    }

    TEST_CASE("framework hooks are recognised")
    {
        CHECK(is_framework_hook("submit_final_answer"));
        CHECK(is_framework_hook("get_relevant_actions"));
        CHECK_FALSE(is_framework_hook("download_file"));
    }
}
