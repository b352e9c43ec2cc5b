#include "dynact/metrics.hpp"
#include "dynact/minipy.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dynact;

namespace {

Trajectory simple(const std::string& id, int steps, int novel, std::optional<bool> success)
{
    oracle::CoverageFixture f{id, steps, novel, success.value_or(false), 0, 0};
    auto t = oracle::make_trajectory(f, {"submit_final_answer"});
    t.success = success;
    return t;
}

ActionRecord with_complexity(const std::string& name, int c, Origin origin = Origin::generated)
{
    ActionRecord r;
    r.name = name;
    r.docstring = "d";
    r.source = "def " + name + "():\n    pass";
    r.origin = origin;
    r.complexity = c;
    return r;
}

}  // namespace

TEST_SUITE("metrics")
{
    TEST_CASE("scorer examples")
    {
        CHECK(score_answer("1,234", "1234"));
        CHECK(score_answer("Paris ", "paris"));
        CHECK(score_answer("3.0", "3"));
        CHECK_FALSE(score_answer("", "x"));
    }

    TEST_CASE("scorer table")
    {
        int passed = 0;
        for (const auto& c : oracle::scorer_table()) {
            bool got = score_answer(c.predicted, c.expected);
            INFO("predicted=\"" << c.predicted << "\" expected=\"" << c.expected << "\"");
            CHECK(got == c.verdict);
            passed += got == c.verdict;
        }
        CHECK(oracle::scorer_table().size() == 30);
        CHECK(passed == 30);
    }

    TEST_CASE("coverage examples")
    {
        auto four = coverage_of_trajectory(simple("a", 4, 1, true), {"submit_final_answer"});
        CHECK(four.coverage == 0.75);
        CHECK(four.novel_steps == 1);
        CHECK(coverage_of_trajectory(simple("b", 3, 0, true), {"submit_final_answer"}).coverage == 1.0);
        auto failed = coverage_of_trajectory(simple("c", 4, 2, false), {"submit_final_answer"});
        CHECK(failed.literal == 1.0);
        CHECK_THROWS_AS(coverage_of_trajectory(simple("d", 2, 1, std::nullopt), {}), MissingLabel);
        Trajectory empty;
        empty.success = true;
        CHECK_THROWS_AS(coverage_of_trajectory(empty, {}), Error);
    }

    TEST_CASE("coverage fixtures match the hand-computed values")
    {
        ActionNames start{"submit_final_answer", "get_relevant_actions"};
        std::vector<Trajectory> trajs;
        for (const auto& f : oracle::coverage_fixtures()) {
            auto t = oracle::make_trajectory(f, start);
            auto c = coverage_of_trajectory(t, start);
            INFO(f.id);
            CHECK(std::abs(c.coverage - f.coverage) <= 1e-12);
            CHECK(std::abs(c.literal - f.literal) <= 1e-12);
            CHECK(c.novel_steps == f.novel);
            if (!f.success)
                CHECK(c.literal == 1.0);

            // Enlarging the start set never lowers coverage.
            ActionNames bigger = start;
            for (const auto& s : t.steps)
                for (const auto& d : s.defined_functions)
                    bigger.insert(d.name);
            CHECK(coverage_of_trajectory(t, bigger).coverage >= c.coverage);
            CHECK(coverage_of_trajectory(t, bigger).coverage == 1.0);
            trajs.push_back(t);
        }

        auto report = coverage_report(trajs, 2);
        double succ_sum = 0, lit_sum = 0;
        int n_succ = 0;
        for (const auto& f : oracle::coverage_fixtures()) {
            lit_sum += f.literal;
            if (f.success) {
                succ_sum += f.coverage;
                ++n_succ;
            }
        }
        REQUIRE(report.mean_success_conditioned);
        CHECK(std::abs(*report.mean_success_conditioned - succ_sum / n_succ) < 1e-12);
        CHECK(std::abs(*report.mean_literal - lit_sum / 20) < 1e-12);
        CHECK(report.per_task.size() == 20);
    }

    TEST_CASE("coverage reports skip unlabeled trajectories and group the curve")
    {
        auto a = simple("a", 2, 1, true);
        auto b = simple("b", 2, 0, true);
        b.start_action_names.insert("extra");
        auto c = simple("c", 2, 0, std::nullopt);
        auto report = coverage_report({a, b, c}, 5);
        CHECK(report.skipped == std::vector<std::string>{"c"});
        auto curve = coverage_curve(report);
        REQUIRE(curve.size() == 2);
        CHECK(curve[0].action_set_size == 1);
        CHECK(curve[0].mean_coverage == 0.5);
        CHECK(curve[1].action_set_size == 2);
        CHECK(curve[1].mean_coverage == 1.0);

        auto none = coverage_report({simple("f", 2, 1, false)}, 1);
        CHECK_FALSE(none.mean_success_conditioned);
        CHECK(none.mean_literal == std::optional<double>(1.0));
    }

    TEST_CASE("complexity examples")
    {
        CHECK(minipy::cyclomatic_complexity("def f(x):\n    return x\n") == 1);
        CHECK(minipy::cyclomatic_complexity("def f(xs):\n    for x in xs:\n        if x:\n            return x\n") == 3);
        CHECK_THROWS_AS(minipy::cyclomatic_complexity("def f(:\n"), AnalysisError);
    }

    TEST_CASE("complexity corpus matches the hand counts")
    {
        const auto& corpus = oracle::complexity_corpus();
        REQUIRE(corpus.size() == 10);
        std::vector<ActionRecord> records;
        int min_c = 100, max_c = 0, total = 0;
        for (const auto& c : corpus) {
            INFO(c.name);
            CHECK(minipy::cyclomatic_complexity(c.source) == c.complexity);
            min_c = std::min(min_c, c.complexity);
            max_c = std::max(max_c, c.complexity);
            total += c.complexity;
            ActionRecord r;
            r.name = c.name;
            r.docstring = "d";
            r.source = c.source;
            records.push_back(r);  // complexity left empty: analyzed on demand
        }
        CHECK(min_c == 1);
        CHECK(max_c == 8);
        auto summary = complexity_summary(records);
        REQUIRE(summary.mean);
        CHECK(*summary.mean == 4.2);
        CHECK(total == 42);
    }

    TEST_CASE("complexity summaries")
    {
        auto s = complexity_summary({with_complexity("a", 1), with_complexity("b", 3), with_complexity("c", 5),
                                     with_complexity("h", 2, Origin::human),
                                     with_complexity("submit_final_answer", 9, Origin::human)});
        CHECK(s.mean == std::optional<double>(3.0));
        CHECK(s.histogram == std::map<int, int>{{1, 1}, {3, 1}, {5, 1}});
        CHECK(s.by_origin.at("human") == std::optional<double>(2.0));

        auto empty = complexity_summary({with_complexity("h", 2, Origin::human)});
        CHECK_FALSE(empty.mean);

        ActionRecord broken;
        broken.name = "broken";
        broken.source = "def broken(:\n";
        auto with_error = complexity_summary({broken, with_complexity("a", 2)});
        CHECK(with_error.errors.size() == 1);
        CHECK(with_error.mean == std::optional<double>(2.0));
    }
}
