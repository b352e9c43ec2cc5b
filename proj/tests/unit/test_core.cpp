#include "dynact/core.hpp"
#include "dynact/serialize.hpp"

#include <doctest.h>

using namespace dynact;

TEST_SUITE("core")
{
    TEST_CASE("default config matches the reference constants")
    {
        RunConfig cfg;
        CHECK(cfg.max_steps == 20);
        CHECK(cfg.temperature == 0.5);
        CHECK(cfg.retrieval_k == 10);
        const RunConfig& same = validate_config(cfg);
        CHECK(&same == &cfg);
    }

    TEST_CASE("invalid configs are rejected")
    {
        RunConfig cfg;
        cfg.flags.allow_generation = false;
        cfg.flags.accumulate = true;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);

        RunConfig zero;
        zero.max_steps = 0;
        CHECK_THROWS_AS(validate_config(zero), ConfigError);

        RunConfig hot;
        hot.temperature = 2.5;
        CHECK_THROWS_AS(validate_config(hot), ConfigError);

        RunConfig k;
        k.retrieval_k = 0;
        CHECK_THROWS_AS(validate_config(k), ConfigError);

        RunConfig test_accumulating;
        test_accumulating.phase = Phase::test;
        CHECK_THROWS_AS(validate_config(test_accumulating), ConfigError);
        test_accumulating.flags.accumulate = false;
        CHECK_NOTHROW(validate_config(test_accumulating));
    }

    TEST_CASE("identifiers")
    {
        CHECK(is_identifier("extract_text_from_pdf"));
        CHECK(is_identifier("_x9"));
        CHECK_FALSE(is_identifier(""));
        CHECK_FALSE(is_identifier("9lives"));
        CHECK_FALSE(is_identifier("a-b"));
        CHECK_FALSE(is_identifier("a.b"));
    }

    TEST_CASE("enum round trips")
    {
        for (auto s : {StepStatus::ok, StepStatus::exec_error, StepStatus::parse_error, StepStatus::timeout,
                       StepStatus::policy_violation})
            CHECK(step_status_from_string(to_string(s)) == s);
        CHECK(phase_from_string("test") == Phase::test);
        CHECK(origin_from_string("human") == Origin::human);
    }

    TEST_CASE("records survive JSON round trips")
    {
        ActionRecord r;
        r.name = "mul";
        r.docstring = "Multiply.";
        r.source = "def mul(a, b):\n    \"\"\"Multiply.\"\"\"\n    return a * b";
        r.created_by_task = "t1";
        r.created_at = "2024-01-01T00:00:00Z";
        r.complexity = 1;
        Json j = r;
        auto back = j.get<ActionRecord>();
        CHECK(back.name == r.name);
        CHECK(back.source == r.source);
        CHECK(back.created_by_task == r.created_by_task);
        CHECK(back.complexity == r.complexity);

        Step s;
        s.index = 3;
        s.thought = "t";
        s.code = "print(1)";
        s.status = StepStatus::policy_violation;
        s.defined_functions.push_back(r);
        s.is_novel = true;
        s.final_answer = "7";
        auto sb = Json(s).get<Step>();
        CHECK(sb.index == 3);
        CHECK(sb.status == StepStatus::policy_violation);
        CHECK(sb.defined_functions.size() == 1);
        CHECK(sb.is_novel);
        CHECK(sb.final_answer == std::optional<std::string>("7"));
    }

    TEST_CASE("merge_config accepts flat and nested flags")
    {
        RunConfig cfg;
        merge_config(cfg, Json::parse(R"({"max_steps": 5, "accumulate": false, "flags": {"load_initial_actions": false}})"));
        CHECK(cfg.max_steps == 5);
        CHECK_FALSE(cfg.flags.accumulate);
        CHECK_FALSE(cfg.flags.load_initial_actions);
        CHECK(cfg.flags.allow_generation);
        CHECK_THROWS_AS(merge_config(cfg, Json::array()), ConfigError);
    }
}
