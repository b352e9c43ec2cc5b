#include "dynact/harness.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

using namespace dynact;

namespace {

std::string self_worker_command()
{
    std::error_code ec;
    auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (ec)
        return {};
    return fmt::format("\"{}\" worker", self.string());
}

struct RunFlags {
    std::optional<std::string> dataset, library, out, phase, provider, transcript, config, endpoint, model, record,
        worker, embedding, embedding_endpoint, embedding_model;
    std::optional<int> max_steps, retrieval_k, parallel, step_timeout, observation_limit;
    std::optional<double> temperature;
    bool no_accumulation = false, no_generation = false, no_initial_actions = false, mock_executor = false;
};

RunOptions build_options(const RunFlags& f)
{
    RunOptions o;
    if (f.config) {
        std::ifstream in(*f.config);
        if (!in)
            throw ConfigError(fmt::format("cannot read config file {}", *f.config));
        Json j = Json::parse(in, nullptr, false);
        if (j.is_discarded())
            throw ConfigError(fmt::format("config file {} is not valid JSON", *f.config));
        merge_options(o, j);
    }
    Json flags = Json::object();
    auto put = [&](const char* key, const auto& v) {
        if (v)
            flags[key] = *v;
    };
    put("dataset", f.dataset);
    put("library", f.library);
    put("out", f.out);
    put("phase", f.phase);
    put("provider", f.provider);
    put("transcript", f.transcript);
    put("endpoint", f.endpoint);
    put("model", f.model);
    put("record", f.record);
    put("worker", f.worker);
    put("embedding", f.embedding);
    put("embedding_endpoint", f.embedding_endpoint);
    put("embedding_model", f.embedding_model);
    put("max_steps", f.max_steps);
    put("retrieval_k", f.retrieval_k);
    put("parallel", f.parallel);
    put("step_timeout_s", f.step_timeout);
    put("observation_limit_chars", f.observation_limit);
    put("temperature", f.temperature);
    if (f.no_accumulation)
        flags["no_accumulation"] = true;
    if (f.no_generation)
        flags["no_generation"] = true;
    if (f.no_initial_actions)
        flags["no_initial_actions"] = true;
    if (f.mock_executor)
        flags["mock_executor"] = true;
    merge_options(o, flags);
    if (!o.mock_executor && o.worker_command.empty())
        o.worker_command = self_worker_command();
    return o;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Runtime for agents that write, keep and reuse their own actions"};
    app.require_subcommand(1);

    RunFlags rf;
    auto* run = app.add_subcommand("run", "Run a dataset through the agent loop");
    run->add_option("--dataset", rf.dataset, "Task file (JSONL)");
    run->add_option("--library", rf.library, "Action library directory");
    run->add_option("--out", rf.out, "Run output directory");
    run->add_option("--phase", rf.phase, "train or test")->check(CLI::IsMember({"train", "test"}));
    run->add_flag("--no-accumulation", rf.no_accumulation, "Do not store new actions");
    run->add_flag("--no-generation", rf.no_generation, "Forbid defining or calling non-library functions");
    run->add_flag("--no-initial-actions", rf.no_initial_actions, "Start without plugin tools");
    run->add_option("--max-steps", rf.max_steps);
    run->add_option("--temperature", rf.temperature);
    run->add_option("--retrieval-k", rf.retrieval_k);
    run->add_option("--provider", rf.provider, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
    run->add_option("--transcript", rf.transcript, "Scripted transcript (JSONL)");
    run->add_flag("--mock-executor", rf.mock_executor, "Run code in-process");
    run->add_option("--config", rf.config, "JSON config file; flags override it");
    run->add_option("--endpoint", rf.endpoint, "Chat completions URL");
    run->add_option("--model", rf.model);
    run->add_option("--record", rf.record, "Append provider exchanges to this JSONL file");
    run->add_option("--worker", rf.worker, "Worker command line");
    run->add_option("--embedding", rf.embedding, "deterministic or remote")
        ->check(CLI::IsMember({"deterministic", "remote"}));
    run->add_option("--embedding-endpoint", rf.embedding_endpoint);
    run->add_option("--embedding-model", rf.embedding_model);
    run->add_option("--parallel", rf.parallel);
    run->add_option("--step-timeout", rf.step_timeout, "Seconds per code execution");
    run->add_option("--observation-limit", rf.observation_limit, "Characters kept per observation");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Recompute reports for a run directory");
    report->add_option("run_dir", report_dir)->required();

    std::string lib_dir, lib_cmd;
    std::optional<std::string> lib_name;
    bool lib_plugins = false;
    auto* library = app.add_subcommand("library", "Inspect or initialize an action library");
    library->add_option("command", lib_cmd, "list, show, verify or init")
        ->required()
        ->check(CLI::IsMember({"list", "show", "verify", "init"}));
    library->add_option("name", lib_name, "Action name for show");
    library->add_option("--library", lib_dir, "Library directory")->required();
    library->add_flag("--plugins", lib_plugins, "With init: install the bundled plugin tools");

    auto* worker = app.add_subcommand("worker", "Serve the execution protocol on stdin/stdout");

    CLI11_PARSE(app, argc, argv);

    if (*run) {
        try {
            return cmd_run(build_options(rf), std::cout, std::cerr);
        } catch (const ConfigError& e) {
            std::cerr << "ConfigError: " << e.what() << "\n";
            return 2;
        }
    }
    if (*report)
        return cmd_report(report_dir, std::cout, std::cerr);
    if (*library)
        return cmd_library(lib_dir, lib_cmd, lib_name, lib_plugins, std::cout, std::cerr);
    if (*worker)
        return serve_worker(std::cin, std::cout);
    return 1;
}
