#pragma once

// Post-hoc analytics over trajectories and libraries: action coverage,
// answer scoring, and cyclomatic-complexity aggregates.

#include "dynact/core.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dynact {

class MissingLabel : public Error {
public:
    using Error::Error;
};

struct TaskCoverage {
    double coverage = 1.0;  // 1 - novel/steps; meaningful for successful tasks
    double literal = 1.0;   // 1 - [success] * novel/steps
    bool success = false;
    int steps = 0;
    int novel_steps = 0;
    std::size_t start_set_size = 0;
};

/// Novelty is recomputed from each step's defined function names against
/// `start_action_names`. Throws MissingLabel when success is unknown and
/// Error for an empty trajectory.
TaskCoverage coverage_of_trajectory(const Trajectory& traj, const ActionNames& start_action_names);

struct CoverageReport {
    std::map<std::string, TaskCoverage> per_task;
    std::optional<double> mean_success_conditioned;  // absent when nothing succeeded
    std::optional<double> mean_literal;               // absent when nothing was labeled
    std::size_t action_set_size = 0;
    std::vector<std::string> skipped;  // task ids without a label or steps
};

/// Each trajectory is measured against its own start_action_names.
CoverageReport coverage_report(const std::vector<Trajectory>& trajectories, std::size_t action_set_size);

struct CurvePoint {
    std::size_t action_set_size = 0;
    double mean_coverage = 0.0;
    std::size_t tasks = 0;
};

/// Success-conditioned mean coverage grouped by start-set size, ascending.
std::vector<CurvePoint> coverage_curve(const CoverageReport& report);

/// Exact-match scoring after normalization: trim; numeric comparison once
/// commas, currency and percent signs are stripped; element-wise comparison
/// when the expected answer is a comma- or semicolon-separated list;
/// otherwise case-insensitive equality.
bool score_answer(std::string_view predicted, std::string_view expected);

struct ComplexitySummary {
    std::optional<double> mean;           // over generated actions
    std::map<int, int> histogram;         // generated actions only
    std::map<std::string, std::optional<double>> by_origin;
    std::map<std::string, std::map<int, int>> histogram_by_origin;
    std::vector<std::string> errors;      // records whose source could not be analyzed
};

/// Records lacking a complexity are analyzed on the spot. Framework
/// primitives (whose sources are stubs) are left out.
ComplexitySummary complexity_summary(const std::vector<ActionRecord>& records);

}  // namespace dynact
