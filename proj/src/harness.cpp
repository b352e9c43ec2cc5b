#include "dynact/harness.hpp"
#include "dynact/library.hpp"
#include "dynact/metrics.hpp"
#include "dynact/retrieval.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace dynact {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw StorageError(fmt::format("cannot read {}", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush())
        throw StorageError(fmt::format("cannot write {}", p.string()));
}

std::string fmt_opt_pct(std::optional<double> v)
{
    return v ? fmt::format("{:.4f}", *v) : std::string("n/a");
}

std::shared_ptr<Embedder> make_embedder(const RunOptions& o)
{
    if (o.embedding == EmbeddingKind::remote)
        return std::make_shared<RemoteEmbedder>(o.embedding_endpoint, o.embedding_model);
    return std::make_shared<DeterministicEmbedder>();
}

std::unique_ptr<Executor> make_executor(const RunOptions& o, const std::vector<ActionRecord>& human)
{
    if (o.mock_executor)
        return start_mock_session(human);
    return start_subprocess_session(split_command(o.worker_command), human);
}

Json json_or_null(const std::optional<double>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Dataset load_dataset(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DatasetError(fmt::format("cannot read dataset {}", path.string()), 0);
    Dataset ds;
    ds.path = path;
    fs::path base = fs::absolute(path).parent_path();
    std::set<std::string> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw DatasetError(fmt::format("{}:{}: not a JSON object", path.string(), lineno), lineno);
        if (!j.contains("task_id") || !j["task_id"].is_string() || j["task_id"].get<std::string>().empty())
            throw DatasetError(fmt::format("{}:{}: missing or empty task_id", path.string(), lineno), lineno);
        if (!j.contains("question") || !j["question"].is_string())
            throw DatasetError(fmt::format("{}:{}: missing question", path.string(), lineno), lineno);
        TaskSpec t;
        try {
            t = j.get<TaskSpec>();
        } catch (const std::exception& e) {
            throw DatasetError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()), lineno);
        }
        if (!ids.insert(t.task_id).second)
            throw DatasetError(fmt::format("{}:{}: duplicate task_id '{}'", path.string(), lineno, t.task_id), lineno);
        for (auto& a : t.attachments) {
            fs::path p(a);
            if (p.is_relative())
                p = base / p;
            p = p.lexically_normal();
            std::error_code ec;
            if (!fs::exists(p, ec))
                throw DatasetError(fmt::format("{}:{}: attachment not found: {}", path.string(), lineno, p.string()),
                                   lineno);
            a = p.string();
        }
        ds.tasks.push_back(std::move(t));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

void to_json(Json& j, const RunOptions& o)
{
    j = Json{{"dataset", o.dataset.string()},
             {"library", o.library_dir.string()},
             {"out", o.out_dir.string()},
             {"config", o.config},
             {"provider", o.provider.kind == ProviderKind::scripted ? "scripted" : "http"},
             {"model", o.provider.model_name},
             {"endpoint", o.provider.endpoint_url ? Json(*o.provider.endpoint_url) : Json(nullptr)},
             {"transcript", o.provider.transcript_path ? Json(o.provider.transcript_path->string()) : Json(nullptr)},
             {"record", o.provider.record_path ? Json(o.provider.record_path->string()) : Json(nullptr)},
             {"mock_executor", o.mock_executor},
             {"worker", o.mock_executor ? Json(nullptr) : Json(o.worker_command)},
             {"embedding", o.embedding == EmbeddingKind::remote ? "remote" : "deterministic"},
             {"embedding_endpoint", o.embedding_endpoint.empty() ? Json(nullptr) : Json(o.embedding_endpoint)},
             {"embedding_model", o.embedding_model},
             {"parallel", o.parallel}};
}

void merge_options(RunOptions& o, const Json& j)
{
    if (!j.is_object())
        throw ConfigError("config file must hold a JSON object");
    auto str = [&](const char* key) -> std::optional<std::string> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null())
            return std::nullopt;
        if (!it->is_string())
            throw ConfigError(fmt::format("config key '{}' must be a string", key));
        return it->get<std::string>();
    };
    try {
        merge_config(o.config, j);
        if (auto it = j.find("config"); it != j.end() && it->is_object())
            merge_config(o.config, *it);
        // Flag-style negations.
        if (j.value("no_accumulation", false))
            o.config.flags.accumulate = false;
        if (j.value("no_generation", false))
            o.config.flags.allow_generation = false;
        if (j.value("no_initial_actions", false))
            o.config.flags.load_initial_actions = false;
        if (auto v = str("dataset"))
            o.dataset = *v;
        if (auto v = str("library"))
            o.library_dir = *v;
        if (auto v = str("out"))
            o.out_dir = *v;
        if (auto v = str("provider")) {
            if (*v == "scripted")
                o.provider.kind = ProviderKind::scripted;
            else if (*v == "http")
                o.provider.kind = ProviderKind::http_chat;
            else
                throw ConfigError(fmt::format("unknown provider '{}'", *v));
        }
        if (auto v = str("transcript"))
            o.provider.transcript_path = *v;
        if (auto v = str("endpoint"))
            o.provider.endpoint_url = *v;
        if (auto v = str("model"))
            o.provider.model_name = *v;
        if (auto v = str("record"))
            o.provider.record_path = *v;
        if (auto v = str("worker"))
            o.worker_command = *v;
        if (auto v = str("embedding")) {
            if (*v == "deterministic")
                o.embedding = EmbeddingKind::deterministic;
            else if (*v == "remote")
                o.embedding = EmbeddingKind::remote;
            else
                throw ConfigError(fmt::format("unknown embedding provider '{}'", *v));
        }
        if (auto v = str("embedding_endpoint"))
            o.embedding_endpoint = *v;
        if (auto v = str("embedding_model"))
            o.embedding_model = *v;
        o.mock_executor = j.value("mock_executor", o.mock_executor);
        o.parallel = j.value("parallel", o.parallel);
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("invalid config file: {}", e.what()));
    }
}

void resolve_options(RunOptions& o)
{
    if (o.config.phase == Phase::test)
        o.config.flags.accumulate = false;
    if (!o.config.flags.allow_generation)
        o.config.flags.accumulate = false;
    o.provider.temperature = o.config.temperature;
    validate_config(o.config);
    validate_provider_config(o.provider);
    if (o.parallel < 1)
        throw ConfigError(fmt::format("parallel must be at least 1 (got {})", o.parallel));
    if (o.dataset.empty())
        throw ConfigError("a dataset path is required");
    if (o.library_dir.empty())
        throw ConfigError("a library directory is required");
    if (o.out_dir.empty())
        throw ConfigError("an output directory is required");
    if (!o.mock_executor && o.worker_command.empty())
        throw ConfigError("no worker command given; pass a worker command or use the mock executor");
    if (o.embedding == EmbeddingKind::remote && o.embedding_endpoint.empty())
        throw ConfigError("the remote embedding provider requires an endpoint");
}

// ---------------------------------------------------------------------------
// Trajectory logs
// ---------------------------------------------------------------------------

std::string trajectory_log_name(const std::string& task_id)
{
    std::string name;
    for (char c : task_id) {
        bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
        name += keep ? c : '_';
    }
    if (name.empty() || name.front() == '.')
        name = "_" + name;
    return name + ".jsonl";
}

void write_trajectory_log(const fs::path& path, const Trajectory& traj,
                          const std::optional<std::string>& expected_answer)
{
    std::string text;
    for (const auto& s : traj.steps)
        text += Json(s).dump() + "\n";
    Json summary{{"summary", true},
                 {"task_id", traj.task_id},
                 {"final_answer", traj.final_answer ? Json(*traj.final_answer) : Json(nullptr)},
                 {"expected_answer", expected_answer ? Json(*expected_answer) : Json(nullptr)},
                 {"success", traj.success ? Json(*traj.success) : Json(nullptr)},
                 {"steps", traj.steps.size()},
                 {"start_action_names", traj.start_action_names},
                 {"config_snapshot", traj.config_snapshot},
                 {"abort_reason", traj.abort_reason ? Json(*traj.abort_reason) : Json(nullptr)}};
    text += summary.dump() + "\n";
    write_text(path, text);
}

LoggedTrajectory read_trajectory_log(const fs::path& path)
{
    std::istringstream in(read_text(path));
    LoggedTrajectory out;
    std::string line;
    int lineno = 0;
    bool have_summary = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw StorageError(fmt::format("{}:{}: malformed log line", path.string(), lineno));
        try {
            if (j.value("summary", false)) {
                auto& t = out.trajectory;
                t.task_id = j.at("task_id").get<std::string>();
                if (j.contains("final_answer") && j["final_answer"].is_string())
                    t.final_answer = j["final_answer"].get<std::string>();
                if (j.contains("expected_answer") && j["expected_answer"].is_string())
                    out.expected_answer = j["expected_answer"].get<std::string>();
                if (j.contains("success") && j["success"].is_boolean())
                    t.success = j["success"].get<bool>();
                t.start_action_names = j.value("start_action_names", ActionNames{});
                if (j.contains("config_snapshot"))
                    t.config_snapshot = j["config_snapshot"].get<RunConfig>();
                if (j.contains("abort_reason") && j["abort_reason"].is_string())
                    t.abort_reason = j["abort_reason"].get<std::string>();
                have_summary = true;
            } else {
                out.trajectory.steps.push_back(j.get<Step>());
            }
        } catch (const std::exception& e) {
            throw StorageError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
    if (!have_summary)
        throw StorageError(fmt::format("{}: missing summary line", path.string()));
    return out;
}

std::map<std::string, std::string> directory_checksums(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        return out;
    for (fs::recursive_directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        if (!it->is_regular_file())
            continue;
        std::string data = read_text(it->path());
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
        std::string hex;
        for (unsigned int i = 0; i < len; ++i)
            hex += fmt::format("{:02x}", md[i]);
        out[fs::relative(it->path(), dir).generic_string()] = hex;
    }
    return out;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

int cmd_run(RunOptions o, std::ostream& out, std::ostream& err, Sleeper sleep)
{
    Dataset dataset;
    try {
        resolve_options(o);
        dataset = load_dataset(o.dataset);
    } catch (const DatasetError& e) {
        err << "DatasetError: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "ConfigError: " << e.what() << "\n";
        return 2;
    }

    std::mutex log_mutex;
    auto log = [&](const std::string& msg) {
        std::lock_guard lock(log_mutex);
        err << "warning: " << msg << "\n";
    };

    try {
        std::vector<std::string> plugin_problems;
        auto library = ActionLibrary::open(o.library_dir, o.config.flags.load_initial_actions, &plugin_problems);
        if (!plugin_problems.empty())
            log(PluginError(plugin_problems).what());
        auto embedder = make_embedder(o);
        EmbeddingIndex index(embedder, o.library_dir / "index" / "embeddings.jsonl");
        index.load();

        if (o.config.phase == Phase::train)
            library.thaw();
        else
            library.freeze();

        fs::create_directories(o.out_dir / "trajectories");
        fs::create_directories(o.out_dir / "reports");
        write_text(o.out_dir / "effective_config.json", Json(o).dump(2) + "\n");

        auto provider = make_provider(o.provider);
        const std::size_t size_before = library.snapshot_names().size();
        const std::size_t generated_before = library.generated_count();

        std::vector<Trajectory> results(dataset.tasks.size());
        std::vector<std::optional<ActionLibrary>> overlays(dataset.tasks.size());
        std::vector<std::unique_ptr<EmbeddingIndex>> overlay_indices(dataset.tasks.size());
        const bool use_overlays = o.parallel > 1 && o.config.phase == Phase::train && o.config.flags.accumulate;

        auto finish_task = [&](std::size_t i) {
            const auto& task = dataset.tasks[i];
            write_trajectory_log(o.out_dir / "trajectories" / trajectory_log_name(task.task_id), results[i],
                                 task.expected_answer);
            const auto& t = results[i];
            std::lock_guard lock(log_mutex);
            out << fmt::format("{}: {} steps, answer={}{}{}\n", task.task_id, t.steps.size(),
                               t.final_answer ? Json(*t.final_answer).dump() : "none",
                               t.success ? (*t.success ? " [correct]" : " [wrong]") : "",
                               t.abort_reason ? " [aborted: " + *t.abort_reason + "]" : "");
        };

        if (o.parallel == 1) {
            auto executor = make_executor(o, library.human_actions());
            LoopContext ctx{library, index, *executor, *provider, sleep, log};
            for (std::size_t i = 0; i < dataset.tasks.size(); ++i) {
                results[i] = run_task(dataset.tasks[i], o.config, ctx);
                finish_task(i);
            }
            executor->shutdown();
        } else {
            std::atomic<std::size_t> next{0};
            std::mutex error_mutex;
            std::optional<std::string> fatal;
            auto worker = [&] {
                std::unique_ptr<Executor> executor;
                try {
                    executor = make_executor(o, library.human_actions());
                } catch (const Error& e) {
                    std::lock_guard lock(error_mutex);
                    fatal = e.what();
                    return;
                }
                for (std::size_t i = next++; i < dataset.tasks.size(); i = next++) {
                    if (use_overlays) {
                        overlays[i] = library.clone_in_memory();
                        overlay_indices[i] = index.clone_in_memory();
                        LoopContext ctx{*overlays[i], *overlay_indices[i], *executor, *provider, sleep, log};
                        results[i] = run_task(dataset.tasks[i], o.config, ctx);
                    } else {
                        LoopContext ctx{library, index, *executor, *provider, sleep, log};
                        results[i] = run_task(dataset.tasks[i], o.config, ctx);
                    }
                    finish_task(i);
                }
                executor->shutdown();
            };
            std::vector<std::thread> threads;
            for (int t = 0; t < o.parallel; ++t)
                threads.emplace_back(worker);
            for (auto& t : threads)
                t.join();
            if (fatal)
                throw WorkerSpawnError(*fatal);
            if (use_overlays) {
                for (std::size_t i = 0; i < overlays.size(); ++i) {
                    if (!overlays[i])
                        continue;
                    auto merged = library.merge_from(*overlays[i]);
                    for (const auto& e : merged.storage_errors)
                        log(e);
                    for (const auto& rec : merged.accepted) {
                        try {
                            index.index_action(rec);
                        } catch (const Error& e) {
                            log(fmt::format("indexing {} failed: {}", rec.name, e.what()));
                        }
                    }
                }
            }
        }

        if (o.config.phase == Phase::train)
            library.freeze();

        int aborted = 0, correct = 0, labeled = 0;
        Json aborted_ids = Json::array();
        for (const auto& t : results) {
            if (t.abort_reason) {
                ++aborted;
                aborted_ids.push_back(t.task_id);
            }
            if (t.success) {
                ++labeled;
                correct += *t.success ? 1 : 0;
            }
        }
        Json manifest{{"dataset", fs::absolute(o.dataset).lexically_normal().string()},
                      {"library_dir", fs::absolute(o.library_dir).lexically_normal().string()},
                      {"phase", to_string(o.config.phase)},
                      {"tasks", dataset.tasks.size()},
                      {"labeled", labeled},
                      {"correct", correct},
                      {"aborted", aborted_ids},
                      {"library_size_before", size_before},
                      {"library_size_after", library.snapshot_names().size()},
                      {"generated_before", generated_before},
                      {"generated_after", library.generated_count()},
                      {"load_initial_actions", o.config.flags.load_initial_actions}};
        write_text(o.out_dir / "manifest.json", manifest.dump(2) + "\n");

        int report_rc = cmd_report(o.out_dir, out, err);
        if (aborted > 0) {
            err << fmt::format("{} trajectory(ies) aborted for infrastructure reasons\n", aborted);
            return 2;
        }
        return report_rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        err << "ConfigError: " << e.what() << "\n";
    } catch (const WorkerSpawnError& e) {
        err << "WorkerSpawnError: " << e.what() << "\n";
    } catch (const HandshakeTimeout& e) {
        err << "HandshakeTimeout: " << e.what() << "\n";
    } catch (const StorageError& e) {
        err << "StorageError: " << e.what() << "\n";
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
    }
    return 2;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const fs::path& run_dir, std::ostream& out, std::ostream& err)
{
    std::vector<fs::path> logs;
    std::error_code ec;
    if (fs::is_directory(run_dir / "trajectories", ec))
        for (fs::directory_iterator it(run_dir / "trajectories", ec), end; !ec && it != end; it.increment(ec))
            if (it->is_regular_file() && it->path().extension() == ".jsonl")
                logs.push_back(it->path());
    std::sort(logs.begin(), logs.end());
    if (logs.empty()) {
        err << fmt::format("no trajectory logs found under {}\n", (run_dir / "trajectories").string());
        return 1;
    }

    std::vector<std::string> problems;
    std::vector<LoggedTrajectory> logged;
    for (const auto& p : logs) {
        try {
            logged.push_back(read_trajectory_log(p));
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
    }

    Json manifest;
    try {
        manifest = Json::parse(read_text(run_dir / "manifest.json"));
    } catch (const std::exception& e) {
        problems.push_back(fmt::format("run manifest unreadable: {}", e.what()));
        manifest = Json::object();
    }
    std::size_t library_size = manifest.value("library_size_after", std::size_t{0});
    fs::create_directories(run_dir / "reports", ec);

    // Coverage.
    std::vector<Trajectory> trajs;
    for (const auto& l : logged)
        trajs.push_back(l.trajectory);
    auto cov = coverage_report(trajs, library_size);
    {
        Json per_task = Json::object();
        for (const auto& [id, c] : cov.per_task)
            per_task[id] = Json{{"coverage", c.coverage},
                                {"literal_coverage", c.literal},
                                {"success", c.success},
                                {"steps", c.steps},
                                {"novel_steps", c.novel_steps},
                                {"start_action_set_size", c.start_set_size}};
        Json j{{"per_task", per_task},
               {"mean_success_conditioned", json_or_null(cov.mean_success_conditioned)},
               {"mean_literal", json_or_null(cov.mean_literal)},
               {"action_set_size", cov.action_set_size},
               {"unlabeled", cov.skipped}};
        try {
            write_text(run_dir / "reports" / "coverage.json", j.dump(2) + "\n");
            std::string csv = "action_set_size,mean_coverage\n";
            for (const auto& pt : coverage_curve(cov))
                csv += fmt::format("{},{:.17g}\n", pt.action_set_size, pt.mean_coverage);
            write_text(run_dir / "reports" / "coverage_curve.csv", csv);
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
    }

    // Scores.
    int correct = 0, labeled = 0;
    {
        Json per_task = Json::object();
        for (const auto& l : logged) {
            const auto& t = l.trajectory;
            bool ok = false;
            if (l.expected_answer) {
                ++labeled;
                ok = t.final_answer && score_answer(*t.final_answer, *l.expected_answer);
                correct += ok ? 1 : 0;
            }
            per_task[t.task_id] = Json{{"predicted", t.final_answer ? Json(*t.final_answer) : Json(nullptr)},
                                       {"expected", l.expected_answer ? Json(*l.expected_answer) : Json(nullptr)},
                                       {"correct", l.expected_answer ? Json(ok) : Json(nullptr)},
                                       {"steps", t.steps.size()},
                                       {"aborted", t.abort_reason.has_value()}};
        }
        Json j{{"per_task", per_task},
               {"tasks", logged.size()},
               {"labeled", labeled},
               {"correct", correct},
               {"accuracy", labeled ? Json(static_cast<double>(correct) / labeled) : Json(nullptr)}};
        try {
            write_text(run_dir / "reports" / "scores.json", j.dump(2) + "\n");
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
    }

    // Complexity.
    try {
        std::string lib_dir = manifest.value("library_dir", std::string{});
        if (lib_dir.empty() || !fs::is_directory(lib_dir, ec))
            throw StorageError(fmt::format("library directory '{}' not found", lib_dir));
        auto library = ActionLibrary::open(lib_dir, manifest.value("load_initial_actions", true));
        std::vector<ActionRecord> records = library.human_actions();
        for (auto& r : library.generated_actions())
            records.push_back(std::move(r));
        auto cs = complexity_summary(records);
        Json by_origin = Json::object();
        for (const auto& [k, v] : cs.by_origin)
            by_origin[k] = json_or_null(v);
        Json hist = Json::object();
        for (const auto& [k, v] : cs.histogram)
            hist[std::to_string(k)] = v;
        Json hist_by_origin = Json::object();
        for (const auto& [origin, h] : cs.histogram_by_origin) {
            Json hj = Json::object();
            for (const auto& [k, v] : h)
                hj[std::to_string(k)] = v;
            hist_by_origin[origin] = hj;
        }
        Json j{{"mean", json_or_null(cs.mean)},
               {"histogram", hist},
               {"by_origin", by_origin},
               {"histogram_by_origin", hist_by_origin},
               {"excluded", cs.errors.size()},
               {"errors", cs.errors}};
        write_text(run_dir / "reports" / "complexity.json", j.dump(2) + "\n");
    } catch (const Error& e) {
        problems.push_back(fmt::format("complexity report failed: {}", e.what()));
    }

    out << fmt::format("{:<28} {}\n", "tasks", logged.size());
    out << fmt::format("{:<28} {}\n", "success rate",
                       labeled ? fmt::format("{}/{} ({:.1f}%)", correct, labeled, 100.0 * correct / labeled) : "n/a");
    out << fmt::format("{:<28} {}\n", "mean coverage (successful)", fmt_opt_pct(cov.mean_success_conditioned));
    out << fmt::format("{:<28} {}\n", "mean coverage (literal)", fmt_opt_pct(cov.mean_literal));
    out << fmt::format("{:<28} {}\n", "library size", library_size);

    for (const auto& p : problems)
        err << "report error: " << p << "\n";
    return problems.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// library
// ---------------------------------------------------------------------------

std::vector<std::string> verify_library(const fs::path& library_dir)
{
    std::vector<std::string> problems;
    std::error_code ec;
    if (!fs::is_directory(library_dir, ec))
        return {fmt::format("{} is not a directory", library_dir.string())};

    std::vector<std::string> plugin_problems;
    std::optional<ActionLibrary> lib;
    try {
        lib = ActionLibrary::open(library_dir, true, &plugin_problems);
    } catch (const Error& e) {
        return {e.what()};
    }
    for (auto& p : plugin_problems)
        problems.push_back("plugin: " + p);

    std::set<std::string> human;
    for (const auto& r : lib->human_actions())
        human.insert(r.name);
    std::set<std::string> generated;
    for (const auto& r : lib->generated_actions()) {
        generated.insert(r.name);
        if (r.docstring.empty())
            problems.push_back(fmt::format("action {} has an empty docstring", r.name));
    }
    for (fs::directory_iterator it(library_dir / "actions", ec), end; !ec && it != end; it.increment(ec)) {
        auto stem = it->path().stem().string();
        if (it->path().extension() == ".json" && human.count(stem))
            problems.push_back(fmt::format("generated action {} collides with a human action", stem));
    }

    EmbeddingIndex index(std::make_shared<DeterministicEmbedder>(), library_dir / "index" / "embeddings.jsonl");
    try {
        index.load();
    } catch (const Error& e) {
        problems.push_back(e.what());
        return problems;
    }
    auto entries = index.snapshot();
    std::optional<std::size_t> dim;
    for (const auto& [name, vec] : *entries) {
        if (!generated.count(name))
            problems.push_back(fmt::format("index entry {} has no generated action", name));
        double sq = 0.0;
        for (double x : vec)
            sq += x * x;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-6)
            problems.push_back(fmt::format("index entry {} is not unit length (norm {:.9f})", name, std::sqrt(sq)));
        if (dim && *dim != vec.size())
            problems.push_back(fmt::format("index entry {} has dimension {} instead of {}", name, vec.size(), *dim));
        dim = vec.size();
    }
    for (const auto& name : generated)
        if (!entries->count(name))
            problems.push_back(fmt::format("missing index entry for action {}", name));
    return problems;
}

int cmd_library(const fs::path& library_dir, const std::string& subcommand, const std::optional<std::string>& name,
                bool plugins, std::ostream& out, std::ostream& err)
{
    try {
        if (subcommand == "init") {
            auto lib = ActionLibrary::open(library_dir, true);
            if (plugins)
                install_shipped_plugins(library_dir);
            lib.write_manifest();
            out << fmt::format("initialized {}\n", library_dir.string());
            return 0;
        }
        std::error_code ec;
        if (!fs::is_directory(library_dir, ec)) {
            err << fmt::format("library directory {} does not exist\n", library_dir.string());
            return 1;
        }
        if (subcommand == "verify") {
            auto problems = verify_library(library_dir);
            for (const auto& p : problems)
                out << "violation: " << p << "\n";
            if (problems.empty())
                out << "ok\n";
            return problems.empty() ? 0 : 1;
        }
        std::vector<std::string> plugin_problems;
        auto lib = ActionLibrary::open(library_dir, true, &plugin_problems);
        for (const auto& p : plugin_problems)
            err << "warning: malformed plugin " << p << "\n";
        if (subcommand == "list") {
            auto row = [&](const ActionRecord& r) {
                out << fmt::format("{:<32} {:<10} {}\n", r.name, to_string(r.origin),
                                   r.complexity ? std::to_string(*r.complexity) : "-");
            };
            for (const auto& r : lib.human_actions())
                row(r);
            for (const auto& r : lib.generated_actions())
                row(r);
            return 0;
        }
        if (subcommand == "show") {
            if (!name) {
                err << "show requires an action name\n";
                return 1;
            }
            auto r = lib.find(*name);
            if (!r) {
                err << "NotFound: " << NotFound(fmt::format("no action named '{}'", *name)).what() << "\n";
                return 1;
            }
            out << fmt::format("name: {}\norigin: {}\n", r->name, to_string(r->origin));
            if (r->created_by_task)
                out << fmt::format("created_by_task: {}\n", *r->created_by_task);
            if (r->complexity)
                out << fmt::format("complexity: {}\n", *r->complexity);
            out << "\n" << r->docstring << "\n\n" << r->source << "\n";
            return 0;
        }
        err << fmt::format("unknown library subcommand '{}'\n", subcommand);
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace dynact
