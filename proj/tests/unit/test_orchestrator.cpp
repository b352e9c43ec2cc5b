#include "dynact/orchestrator.hpp"

#include <doctest.h>

using namespace dynact;

namespace {

using Script = std::map<std::pair<std::string, int>, std::string>;

std::string turn(const std::string& thought, const std::string& code)
{
    return thought + "\n```python\n" + code + "\n```";
}

class FlakyProvider : public ChatProvider {
public:
    FlakyProvider(int failures, std::string reply) : failures_(failures), reply_(std::move(reply)) {}
    std::string complete(const std::vector<ChatMessage>&, const RequestKey&) override
    {
        ++calls;
        if (failures_-- > 0)
            throw ProviderError("service unavailable", 503);
        return reply_;
    }
    int calls = 0;

private:
    int failures_;
    std::string reply_;
};

class CapturingProvider : public ChatProvider {
public:
    std::string complete(const std::vector<ChatMessage>& messages, const RequestKey&) override
    {
        seen.push_back(messages);
        return "Still thinking.\n```python\nprint('step')\n```";
    }
    std::vector<std::vector<ChatMessage>> seen;
};

struct Harness {
    ActionLibrary library = ActionLibrary::in_memory();
    EmbeddingIndex index{std::make_shared<DeterministicEmbedder>(), std::nullopt};
    std::unique_ptr<Executor> executor = start_mock_session(library.human_actions());
    std::vector<std::chrono::seconds> sleeps;
    std::vector<std::string> warnings;

    Trajectory run(ChatProvider& chat, const TaskSpec& task, const RunConfig& cfg)
    {
        LoopContext ctx{library, index, *executor, chat, [this](std::chrono::seconds s) { sleeps.push_back(s); },
                        [this](const std::string& w) { warnings.push_back(w); }};
        return run_task(task, cfg, ctx);
    }
};

TaskSpec task(const std::string& id, std::optional<std::string> expected = std::nullopt)
{
    TaskSpec t;
    t.task_id = id;
    t.question = "Question for " + id;
    t.expected_answer = std::move(expected);
    return t;
}

}  // namespace

TEST_SUITE("orchestrator")
{
    TEST_CASE("two-step transcript defines a helper then answers")
    {
        Harness h;
        ScriptedProvider chat(Script{
            {{"T1", 1}, turn("Define a helper.", "def seven():\n    \"\"\"Return seven.\"\"\"\n    return 7\nprint(seven())")},
            {{"T1", 2}, turn("Answer.", "submit_final_answer(\"7\")")},
        });
        auto before = h.library.snapshot_names().size();
        auto t = h.run(chat, task("T1", "7"), RunConfig{});
        REQUIRE(t.steps.size() == 2);
        CHECK(t.steps[0].status == StepStatus::ok);
        CHECK(t.steps[0].observation == "7\n");
        CHECK(t.steps[0].is_novel);
        CHECK_FALSE(t.steps[1].is_novel);
        CHECK(t.final_answer == std::optional<std::string>("7"));
        CHECK(t.success == std::optional<bool>(true));
        CHECK(h.library.snapshot_names().size() == before + 1);
        CHECK(h.index.contains("seven"));
        CHECK(t.start_action_names.count("seven") == 0);
    }

    TEST_CASE("without accumulation the library stays unchanged")
    {
        Harness h;
        ScriptedProvider chat(Script{
            {{"T", 1}, turn("Define.", "def f():\n    \"\"\"F.\"\"\"\n    return 1\nsubmit_final_answer(f())")}});
        RunConfig cfg;
        cfg.flags.accumulate = false;
        auto t = h.run(chat, task("T"), cfg);
        CHECK(t.final_answer == std::optional<std::string>("1"));
        CHECK(h.library.generated_count() == 0);
        CHECK_FALSE(t.success);
    }

    TEST_CASE("generation policy blocks definitions before execution")
    {
        Harness h;
        ScriptedProvider chat(Script{
            {{"T", 1}, turn("Define.", "def f():\n    \"\"\"F.\"\"\"\n    return 1\nsubmit_final_answer(f())")},
            {{"T", 2}, turn("Use tools only.", "submit_final_answer(2)")},
        });
        RunConfig cfg;
        cfg.flags.allow_generation = false;
        cfg.flags.accumulate = false;
        auto t = h.run(chat, task("T", "2"), cfg);
        REQUIRE(t.steps.size() == 2);
        CHECK(t.steps[0].status == StepStatus::policy_violation);
        CHECK(t.steps[0].observation.rfind("PolicyViolation:", 0) == 0);
        CHECK(t.steps[0].observation.find("def f") != std::string::npos);
        CHECK(t.steps[1].status == StepStatus::ok);
        CHECK(t.success == std::optional<bool>(true));
        CHECK(h.library.generated_count() == 0);
        // Nothing from the blocked step ran.
        CHECK(h.executor->execute("f", 5).error->type == "NameError");
    }

    TEST_CASE("policy violations cover lambdas and non-action calls")
    {
        AnalyzeResult a;
        a.definitions = {"<lambda>", "g"};
        a.calls = {"submit_final_answer", "len", "os.path.basename", "len"};
        auto v = generation_policy_violations(a, {"submit_final_answer", "get_relevant_actions"});
        CHECK(v == std::vector<std::string>{"lambda", "def g", "len", "os.path.basename"});
        AnalyzeResult clean;
        clean.calls = {"submit_final_answer"};
        CHECK(generation_policy_violations(clean, {"submit_final_answer"}).empty());
    }

    TEST_CASE("the step budget ends trajectories without an answer")
    {
        Harness h;
        CapturingProvider chat;
        auto t = h.run(chat, task("T", "x"), RunConfig{});
        CHECK(t.steps.size() == 20);
        CHECK_FALSE(t.final_answer);
        CHECK(t.success == std::optional<bool>(false));
        CHECK_FALSE(t.abort_reason);
        // Every call sees the system prompt, the task and the full history.
        REQUIRE(chat.seen.size() == 20);
        CHECK(chat.seen[0].size() == 2);
        CHECK(chat.seen[19].size() == 2 + 2 * 19);
        CHECK(chat.seen[1][2].role == Role::assistant);
        CHECK(chat.seen[1][3].content == "Observation:\nstep\n");
    }

    TEST_CASE("responses without code become parse errors")
    {
        Harness h;
        ScriptedProvider chat(Script{{{"T", 1}, "I am not sure."}, {{"T", 2}, turn("Ok.", "submit_final_answer(1)")}});
        auto t = h.run(chat, task("T"), RunConfig{});
        REQUIRE(t.steps.size() == 2);
        CHECK(t.steps[0].status == StepStatus::parse_error);
        CHECK(t.steps[0].observation == parse_error_observation);
        CHECK(t.steps[0].thought == "I am not sure.");
    }

    TEST_CASE("provider errors are retried with backoff")
    {
        Harness h;
        FlakyProvider chat(2, turn("Answer.", "submit_final_answer(3)"));
        auto t = h.run(chat, task("T"), RunConfig{});
        CHECK(chat.calls == 3);
        CHECK(h.sleeps == std::vector<std::chrono::seconds>{std::chrono::seconds(1), std::chrono::seconds(2)});
        CHECK(t.final_answer == std::optional<std::string>("3"));
        CHECK_FALSE(t.abort_reason);
    }

    TEST_CASE("persistent provider failure aborts the trajectory")
    {
        Harness h;
        FlakyProvider chat(100, "");
        auto t = h.run(chat, task("T"), RunConfig{});
        CHECK(chat.calls == 4);
        CHECK(h.sleeps ==
              std::vector<std::chrono::seconds>{std::chrono::seconds(1), std::chrono::seconds(2), std::chrono::seconds(4)});
        CHECK(t.steps.empty());
        REQUIRE(t.abort_reason);
        CHECK(t.abort_reason->find("4 attempts") != std::string::npos);
    }

    TEST_CASE("exhausted transcripts abort without retrying")
    {
        Harness h;
        ScriptedProvider chat(Script{});
        auto t = h.run(chat, task("T"), RunConfig{});
        CHECK(h.sleeps.empty());
        CHECK(t.abort_reason);
    }

    TEST_CASE("retrieval callback results")
    {
        auto library = ActionLibrary::in_memory();
        EmbeddingIndex index(std::make_shared<DeterministicEmbedder>(), std::nullopt);
        auto empty = handle_retrieval_callback("parse dates", std::nullopt, library, index, 10);
        CHECK(empty.results.empty());
        CHECK(empty.text == "No relevant actions found for \"parse dates\".");

        Step s;
        s.status = StepStatus::ok;
        ActionRecord r;
        r.name = "parse_date";
        r.docstring = "Parse a date string.";
        r.source = "def parse_date(s):\n    \"\"\"Parse a date string.\"\"\"\n    return s";
        s.defined_functions.push_back(r);
        for (const auto& a : library.accumulate(s, "t").accepted)
            index.index_action(a);
        auto one = handle_retrieval_callback("Parse a date string.", std::nullopt, library, index, 10);
        REQUIRE(one.results.size() == 1);
        CHECK(one.results[0].name == "parse_date");
        CHECK(one.results[0].source == r.source);
        CHECK(one.text.find("# parse_date (score 1.0000)") != std::string::npos);
    }

    TEST_CASE("retrieval default k comes from the configuration")
    {
        auto library = ActionLibrary::in_memory();
        EmbeddingIndex index(std::make_shared<DeterministicEmbedder>(), std::nullopt);
        Step s;
        s.status = StepStatus::ok;
        for (int i = 0; i < 12; ++i) {
            ActionRecord r;
            r.name = "fn_" + std::to_string(i);
            r.docstring = "Helper number " + std::to_string(i) + ".";
            r.source = "def " + r.name + "():\n    pass";
            s.defined_functions.push_back(r);
        }
        for (const auto& a : library.accumulate(s, "t").accepted)
            index.index_action(a);
        CHECK(handle_retrieval_callback("helper", std::nullopt, library, index, 10).results.size() == 10);
        CHECK(handle_retrieval_callback("helper", std::nullopt, library, index, 4).results.size() == 4);
        CHECK(handle_retrieval_callback("helper", 2, library, index, 10).results.size() == 2);
    }

    TEST_CASE("retrieved actions become callable in the next step")
    {
        Harness h;
        Step s;
        s.status = StepStatus::ok;
        ActionRecord r;
        r.name = "triple";
        r.docstring = "Multiply a number by three.";
        r.source = "def triple(x):\n    \"\"\"Multiply a number by three.\"\"\"\n    return 3 * x";
        s.defined_functions.push_back(r);
        for (const auto& a : h.library.accumulate(s, "earlier").accepted)
            h.index.index_action(a);
        ScriptedProvider chat(Script{
            {{"T", 1}, turn("Search.", "get_relevant_actions('multiply by three')")},
            {{"T", 2}, turn("Use it.", "submit_final_answer(triple(5))")},
        });
        auto t = h.run(chat, task("T", "15"), RunConfig{});
        REQUIRE(t.steps.size() == 2);
        CHECK(t.steps[0].observation.find("# triple") != std::string::npos);
        CHECK(t.success == std::optional<bool>(true));
        CHECK(t.start_action_names.count("triple") == 1);
    }

    TEST_CASE("novelty is judged against the start set")
    {
        ActionNames start{"submit_final_answer", "existing"};
        Step fresh;
        ActionRecord a;
        a.name = "brand_new";
        fresh.defined_functions.push_back(a);
        CHECK(mark_novelty(fresh, start).is_novel);
        Step calls_only;
        CHECK_FALSE(mark_novelty(calls_only, start).is_novel);
        Step redefine;
        a.name = "existing";
        redefine.defined_functions.push_back(a);
        CHECK_FALSE(mark_novelty(redefine, start).is_novel);
    }

    TEST_CASE("task messages list attachments")
    {
        TaskSpec t = task("T");
        t.attachments = {"/data/a.csv"};
        CHECK(task_message(t) == "Task: Question for T\n\nAttached files:\n- /data/a.csv");
    }
}
