#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dynact {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class AnalysisError : public Error {
public:
    using Error::Error;
};

class StorageError : public Error {
public:
    using Error::Error;
};

// Chat or embedding endpoint failure. `status` is the HTTP status, or 0 when
// the request never got a response.
class ProviderError : public Error {
public:
    ProviderError(const std::string& message, int status = 0) : Error(message), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

using ActionNames = std::set<std::string>;

struct TaskSpec {
    std::string task_id;
    std::string question;
    std::vector<std::string> attachments;
    std::optional<std::string> expected_answer;
    std::optional<int> level;

    bool operator==(const TaskSpec&) const = default;
};

enum class Origin { human, generated };

struct ActionRecord {
    std::string name;
    std::string docstring;
    std::string source;
    Origin origin = Origin::generated;
    std::optional<std::string> created_by_task;
    std::string created_at;  // ISO-8601 UTC, seconds resolution
    std::optional<std::vector<double>> embedding;
    std::optional<int> complexity;

    bool operator==(const ActionRecord&) const = default;
};

enum class StepStatus { ok, exec_error, parse_error, timeout, policy_violation };

struct Step {
    int index = 1;
    std::string thought;
    std::string code;
    std::string observation;
    StepStatus status = StepStatus::ok;
    std::vector<ActionRecord> defined_functions;
    bool is_novel = false;
    std::optional<std::string> final_answer;

    bool operator==(const Step&) const = default;
};

enum class Phase { train, test };

struct AblationFlags {
    bool accumulate = true;         // AA
    bool allow_generation = true;   // AI
    bool load_initial_actions = true;  // IA

    bool operator==(const AblationFlags&) const = default;
};

struct RunConfig {
    int max_steps = 20;
    double temperature = 0.5;
    int retrieval_k = 10;
    AblationFlags flags;
    Phase phase = Phase::train;
    int step_timeout_s = 120;
    int observation_limit_chars = 8192;

    bool operator==(const RunConfig&) const = default;
};

struct Trajectory {
    std::string task_id;
    std::vector<Step> steps;
    std::optional<std::string> final_answer;
    std::optional<bool> success;
    RunConfig config_snapshot;
    // Action names known before step 1; novelty is judged against this set.
    ActionNames start_action_names;
    // Set when the loop stopped for an infrastructure reason (provider down).
    std::optional<std::string> abort_reason;

    bool operator==(const Trajectory&) const = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Returns `cfg` unchanged when every RunConfig invariant holds, otherwise
/// throws ConfigError naming the violated constraint.
const RunConfig& validate_config(const RunConfig& cfg);

/// Letters, digits and underscore, not starting with a digit.
bool is_identifier(std::string_view name);

/// Current UTC time formatted as `YYYY-MM-DDTHH:MM:SSZ`.
std::string utc_timestamp();

std::string_view to_string(Origin origin);
std::string_view to_string(StepStatus status);
std::string_view to_string(Phase phase);
Origin origin_from_string(std::string_view text);
StepStatus step_status_from_string(std::string_view text);
Phase phase_from_string(std::string_view text);

}  // namespace dynact
