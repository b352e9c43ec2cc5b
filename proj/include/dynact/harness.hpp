#pragma once

// Dataset ingestion, train/test runs, report generation and library
// management. The command-line tool is a thin layer over these functions.

#include "dynact/core.hpp"
#include "dynact/llm.hpp"
#include "dynact/orchestrator.hpp"
#include "dynact/serialize.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dynact {

class DatasetError : public Error {
public:
    DatasetError(const std::string& message, int line) : Error(message), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct Dataset {
    std::filesystem::path path;
    std::vector<TaskSpec> tasks;
};

/// JSONL with required task_id and question. Relative attachment paths are
/// resolved against the dataset's directory and must exist.
Dataset load_dataset(const std::filesystem::path& path);

enum class EmbeddingKind { deterministic, remote };

struct RunOptions {
    std::filesystem::path dataset;
    std::filesystem::path library_dir;
    std::filesystem::path out_dir;
    RunConfig config;
    ProviderConfig provider;
    bool mock_executor = false;
    std::string worker_command;  // used unless mock_executor
    EmbeddingKind embedding = EmbeddingKind::deterministic;
    std::string embedding_endpoint;
    std::string embedding_model = "text-embedding-3-large";
    int parallel = 1;
};

void to_json(Json& j, const RunOptions& o);

/// Overlays config-file keys (the long flag names with underscores) onto `o`.
void merge_options(RunOptions& o, const Json& j);

/// Applies the phase and generation implications to the flags, then
/// validates. Throws ConfigError.
void resolve_options(RunOptions& o);

/// Exit codes: 0 completed (task failures included), 2 configuration,
/// dataset or infrastructure failure (including aborted trajectories).
int cmd_run(RunOptions options, std::ostream& out, std::ostream& err, Sleeper sleep = real_sleep);

/// Writes reports/{coverage,complexity,scores}.json and coverage_curve.csv.
/// Exit 1 when the run directory has no logs or a report fails.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

/// Subcommands: list, show NAME, verify, init (with `plugins` installing the
/// bundled plugin tools).
int cmd_library(const std::filesystem::path& library_dir, const std::string& subcommand,
                const std::optional<std::string>& name, bool plugins, std::ostream& out, std::ostream& err);

/// Problems found by `library verify`; empty when the library is consistent.
std::vector<std::string> verify_library(const std::filesystem::path& library_dir);

struct LoggedTrajectory {
    Trajectory trajectory;
    std::optional<std::string> expected_answer;
};

std::string trajectory_log_name(const std::string& task_id);
void write_trajectory_log(const std::filesystem::path& path, const Trajectory& traj,
                          const std::optional<std::string>& expected_answer);
LoggedTrajectory read_trajectory_log(const std::filesystem::path& path);

/// SHA-256 of every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> directory_checksums(const std::filesystem::path& dir);

}  // namespace dynact
