#include "dynact/harness.hpp"
#include "dynact/serialize.hpp"

#include <doctest.h>

#include <chrono>
#include <fstream>
#include <sstream>

using namespace dynact;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = DYNACT_FIXTURES_DIR;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name)
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Transcript code opens attachments by relative path.
struct InDir {
    fs::path saved = fs::current_path();
    explicit InDir(const fs::path& p) { fs::current_path(p); }
    ~InDir() { fs::current_path(saved); }
};

void write(const fs::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    f << text;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p, std::size_t count)
{
    std::ifstream f(p);
    std::vector<std::string> out;
    for (std::string line; out.size() < count && std::getline(f, line);)
        out.push_back(line);
    return out;
}

// Copies the first `count` scripted tasks next to a copy of their attachments.
fs::path subset_dataset(const fs::path& dir, std::size_t count)
{
    fs::create_directories(dir);
    fs::copy(fixtures / "scripted" / "files", dir / "files", fs::copy_options::recursive);
    std::string text;
    for (const auto& l : lines_of(fixtures / "scripted" / "tasks.jsonl", count))
        text += l + "\n";
    write(dir / "tasks.jsonl", text);
    return dir / "tasks.jsonl";
}

RunOptions scripted_options(const fs::path& dataset, const fs::path& library, const fs::path& out,
                            const std::string& suite = "scripted")
{
    RunOptions o;
    o.dataset = dataset;
    o.library_dir = library;
    o.out_dir = out;
    o.provider.kind = ProviderKind::scripted;
    o.provider.transcript_path = fixtures / suite / "transcript.jsonl";
    o.mock_executor = true;
    return o;
}

int run(RunOptions o, std::string* text = nullptr)
{
    std::ostringstream out, err;
    int code = cmd_run(std::move(o), out, err, [](std::chrono::seconds) {});
    if (text)
        *text = out.str() + err.str();
    return code;
}

int library(const fs::path& dir, const std::string& sub, std::optional<std::string> name, bool plugins,
            std::string* text = nullptr)
{
    std::ostringstream out, err;
    int code = cmd_library(dir, sub, name, plugins, out, err);
    if (text)
        *text = out.str() + err.str();
    return code;
}

std::size_t count_lines(const std::string& s)
{
    std::size_t n = 0;
    for (char c : s)
        n += c == '\n';
    return n;
}

}  // namespace

TEST_SUITE("harness")
{
    TEST_CASE("datasets resolve attachments and reject bad lines")
    {
        auto ds = load_dataset(fixtures / "scripted" / "tasks.jsonl");
        REQUIRE(ds.tasks.size() == 12);
        CHECK(ds.tasks[0].task_id == "t01");
        REQUIRE(ds.tasks[2].attachments.size() == 1);
        CHECK(fs::path(ds.tasks[2].attachments[0]).is_absolute());
        CHECK(fs::exists(ds.tasks[2].attachments[0]));

        TempDir dir("dynact_ds_bad");
        write(dir.path / "bad.jsonl",
              "{\"task_id\": \"a\", \"question\": \"q\"}\n\n{\"task_id\": \"b\", \"question\": \"q\"}\n{not json\n");
        try {
            load_dataset(dir.path / "bad.jsonl");
            FAIL("expected DatasetError");
        } catch (const DatasetError& e) {
            CHECK(e.line() == 4);
            CHECK(std::string(e.what()).find(":4:") != std::string::npos);
        }

        write(dir.path / "line3.jsonl", "{\"task_id\": \"a\", \"question\": \"q\"}\n"
                                        "{\"task_id\": \"b\", \"question\": \"q\"}\n"
                                        "[1, 2]\n");
        auto o = scripted_options(dir.path / "line3.jsonl", dir.path / "lib", dir.path / "out");
        std::string text;
        CHECK(run(o, &text) == 2);
        CHECK(text.find(":3:") != std::string::npos);

        write(dir.path / "dup.jsonl",
              "{\"task_id\": \"a\", \"question\": \"q\"}\n{\"task_id\": \"a\", \"question\": \"r\"}\n");
        CHECK_THROWS_AS(load_dataset(dir.path / "dup.jsonl"), DatasetError);
        write(dir.path / "noq.jsonl", "{\"task_id\": \"a\"}\n");
        CHECK_THROWS_AS(load_dataset(dir.path / "noq.jsonl"), DatasetError);
        write(dir.path / "att.jsonl",
              "{\"task_id\": \"a\", \"question\": \"q\", \"attachments\": [\"missing.txt\"]}\n");
        CHECK_THROWS_AS(load_dataset(dir.path / "att.jsonl"), DatasetError);
    }

    TEST_CASE("options: flags override the config file, which overrides defaults")
    {
        RunOptions o;
        merge_options(o, Json::parse(R"({"max_steps": 5, "temperature": 0.2, "provider": "scripted",
                                         "transcript": "t.jsonl", "mock_executor": true})"));
        merge_options(o, Json::parse(R"({"max_steps": 3, "no_accumulation": true})"));
        CHECK(o.config.max_steps == 3);
        CHECK(o.config.temperature == 0.2);
        CHECK(o.config.retrieval_k == 10);
        CHECK_FALSE(o.config.flags.accumulate);
        CHECK(o.mock_executor);
        CHECK_THROWS_AS(merge_options(o, Json::parse(R"({"provider": "carrier-pigeon"})")), ConfigError);
        CHECK_THROWS_AS(merge_options(o, Json::parse("[1]")), ConfigError);

        RunOptions t;
        t.dataset = "d";
        t.library_dir = "l";
        t.out_dir = "o";
        t.provider.transcript_path = "t";
        t.mock_executor = true;
        t.config.phase = Phase::test;
        resolve_options(t);
        CHECK_FALSE(t.config.flags.accumulate);

        RunOptions g = t;
        g.config.phase = Phase::train;
        g.config.flags.accumulate = true;
        g.config.flags.allow_generation = false;
        resolve_options(g);
        CHECK_FALSE(g.config.flags.accumulate);

        RunOptions w = g;
        w.mock_executor = false;
        w.worker_command.clear();
        CHECK_THROWS_AS(resolve_options(w), ConfigError);
    }

    TEST_CASE("trajectory logs round-trip")
    {
        CHECK(trajectory_log_name("t01") == "t01.jsonl");
        CHECK(trajectory_log_name("a/b c") == "a_b_c.jsonl");
        CHECK(trajectory_log_name("..") == "_...jsonl");

        Trajectory t;
        t.task_id = "x";
        t.final_answer = "7";
        t.success = true;
        t.start_action_names = {"submit_final_answer"};
        Step s;
        s.index = 1;
        s.code = "submit_final_answer(7)";
        s.observation = "";
        s.final_answer = "7";
        t.steps.push_back(s);
        TempDir dir("dynact_log_rt");
        write_trajectory_log(dir.path / "x.jsonl", t, std::string("7"));
        auto back = read_trajectory_log(dir.path / "x.jsonl");
        CHECK(back.trajectory == t);
        CHECK(back.expected_answer == std::optional<std::string>("7"));
        write(dir.path / "bad.jsonl", slurp(dir.path / "x.jsonl").substr(0, slurp(dir.path / "x.jsonl").find('\n') + 1));
        CHECK_THROWS_AS(read_trajectory_log(dir.path / "bad.jsonl"), StorageError);
    }

    TEST_CASE("scripted run writes logs, reports and the effective config")
    {
        TempDir dir("dynact_run_scripted");
        InDir cwd(fixtures / "scripted");
        REQUIRE(library(dir.path / "lib", "init", std::nullopt, true) == 0);
        auto o = scripted_options(fixtures / "scripted" / "tasks.jsonl", dir.path / "lib", dir.path / "out");
        std::string text;
        REQUIRE(run(o, &text) == 0);
        INFO(text);
        CHECK(text.find("t01: ") != std::string::npos);
        for (const char* f : {"effective_config.json", "manifest.json", "trajectories/t12.jsonl",
                              "reports/coverage.json", "reports/scores.json", "reports/complexity.json",
                              "reports/coverage_curve.csv"})
            CHECK(fs::exists(dir.path / "out" / f));
        auto manifest = Json::parse(slurp(dir.path / "out" / "manifest.json"));
        CHECK(manifest["correct"] == 12);
        CHECK(manifest["library_size_after"] == 14);
        auto eff = Json::parse(slurp(dir.path / "out" / "effective_config.json"));
        CHECK(eff["config"]["max_steps"] == 20);
        CHECK(eff["mock_executor"] == true);

        auto before = directory_checksums(dir.path / "out" / "reports");
        std::ostringstream out, err;
        REQUIRE(cmd_report(dir.path / "out", out, err) == 0);
        CHECK(directory_checksums(dir.path / "out" / "reports") == before);
        CHECK(out.str().find("success rate") != std::string::npos);

        auto curve = slurp(dir.path / "out" / "reports" / "coverage_curve.csv");
        CHECK(curve.rfind("action_set_size,mean_coverage\n", 0) == 0);

        CHECK(verify_library(dir.path / "lib").empty());
    }

    TEST_CASE("report on an empty directory fails")
    {
        TempDir dir("dynact_report_empty");
        std::ostringstream out, err;
        CHECK(cmd_report(dir.path, out, err) == 1);
    }

    TEST_CASE("train then test keeps the library unchanged")
    {
        TempDir dir("dynact_train_test");
        auto train = subset_dataset(dir.path / "train", 10);
        fs::create_directories(dir.path / "test");
        auto test = subset_dataset(dir.path / "test", 5);
        InDir cwd(fixtures / "scripted");

        REQUIRE(run(scripted_options(train, dir.path / "lib", dir.path / "out_train")) == 0);
        auto after_train = Json::parse(slurp(dir.path / "out_train" / "manifest.json"));
        auto sums = directory_checksums(dir.path / "lib");

        auto o = scripted_options(test, dir.path / "lib", dir.path / "out_test");
        o.config.phase = Phase::test;
        REQUIRE(run(o) == 0);
        auto after_test = Json::parse(slurp(dir.path / "out_test" / "manifest.json"));
        CHECK(after_test["library_size_before"] == after_train["library_size_after"]);
        CHECK(after_test["library_size_after"] == after_train["library_size_after"]);
        CHECK(directory_checksums(dir.path / "lib") == sums);
        CHECK(after_test["correct"] == 5);
    }

    TEST_CASE("no initial actions and no generation")
    {
        TempDir dir("dynact_row1");
        auto o = scripted_options(fixtures / "ablation" / "tasks.jsonl", dir.path / "lib", dir.path / "out", "ablation");
        o.config.max_steps = 2;
        o.config.flags.load_initial_actions = false;
        o.config.flags.allow_generation = false;
        REQUIRE(run(o) == 0);
        auto manifest = Json::parse(slurp(dir.path / "out" / "manifest.json"));
        CHECK(manifest["correct"] == 2);
        CHECK(manifest["library_size_after"] == manifest["library_size_before"]);
        int violations = 0;
        for (const auto& e : fs::directory_iterator(dir.path / "out" / "trajectories"))
            for (const auto& s : read_trajectory_log(e.path()).trajectory.steps)
                violations += s.status == StepStatus::policy_violation;
        CHECK(violations == 8);
    }

    TEST_CASE("parallel runs of independent tasks match the sequential outcome")
    {
        TempDir dir("dynact_parallel");
        auto dataset = fixtures / "ablation" / "tasks.jsonl";
        auto seq = scripted_options(dataset, dir.path / "lib_seq", dir.path / "seq", "ablation");
        seq.config.max_steps = 2;
        REQUIRE(run(seq) == 0);
        auto par = scripted_options(dataset, dir.path / "lib_par", dir.path / "par", "ablation");
        par.config.max_steps = 2;
        par.parallel = 3;
        REQUIRE(run(par) == 0);
        auto a = Json::parse(slurp(dir.path / "seq" / "manifest.json"));
        auto b = Json::parse(slurp(dir.path / "par" / "manifest.json"));
        CHECK(a["correct"] == 6);
        CHECK(b["correct"] == 6);
        CHECK(a["library_size_after"] == b["library_size_after"]);
        // Start sets differ: parallel tasks all begin from the pre-run library.
        for (const auto& e : fs::directory_iterator(dir.path / "seq" / "trajectories")) {
            auto x = read_trajectory_log(e.path()).trajectory;
            auto y = read_trajectory_log(dir.path / "par" / "trajectories" / e.path().filename()).trajectory;
            CHECK(x.steps == y.steps);
            CHECK(x.final_answer == y.final_answer);
        }
    }

    TEST_CASE("library commands")
    {
        TempDir dir("dynact_libcmd");
        std::string text;
        CHECK(library(dir.path / "lib", "list", std::nullopt, false) == 1);
        REQUIRE(library(dir.path / "lib", "init", std::nullopt, false) == 0);
        REQUIRE(library(dir.path / "lib", "list", std::nullopt, false, &text) == 0);
        CHECK(count_lines(text) == 2);
        CHECK(text.find("submit_final_answer") != std::string::npos);

        REQUIRE(library(dir.path / "lib", "show", std::string("submit_final_answer"), false, &text) == 0);
        CHECK(text.find("final answer") != std::string::npos);
        CHECK(library(dir.path / "lib", "show", std::string("nope"), false) == 1);

        {
            InDir cwd(fixtures / "scripted");
            REQUIRE(run(scripted_options(fixtures / "scripted" / "tasks.jsonl", dir.path / "lib", dir.path / "out")) ==
                    0);
        }
        REQUIRE(library(dir.path / "lib", "verify", std::nullopt, false, &text) == 0);
        CHECK(text == "ok\n");
        fs::remove(dir.path / "lib" / "index" / "embeddings.jsonl");
        CHECK(library(dir.path / "lib", "verify", std::nullopt, false, &text) != 0);
        CHECK(text.find("add_numbers") != std::string::npos);
    }
}
