#pragma once

// Hand-prepared expectations and independent reference implementations used
// by both the unit tests and the acceptance binary.

#include "dynact/core.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace oracle {

struct ScorerCase {
    std::string predicted;
    std::string expected;
    bool verdict;
};

const std::vector<ScorerCase>& scorer_table();

struct CoverageFixture {
    std::string id;
    int steps;
    int novel;
    bool success;
    double coverage;  // 1 - novel/steps, written out by hand
    double literal;   // 1.0 for failed trajectories
};

const std::vector<CoverageFixture>& coverage_fixtures();

// Builds a trajectory whose first `novel` steps define a fresh function and
// whose remaining steps redefine a start-set name or define nothing.
dynact::Trajectory make_trajectory(const CoverageFixture& f, const dynact::ActionNames& start);

struct ComplexityCase {
    std::string name;
    std::string source;
    int complexity;
};

const std::vector<ComplexityCase>& complexity_corpus();

// Trigram counts exactly as the deterministic embedder defines them, kept as
// integers so cosine comparisons can be done without rounding.
using Counts = std::map<int, std::int64_t>;
Counts trigram_counts(const std::string& text);

struct Ranked {
    std::string name;
    double score;
};

// Exhaustive ranking by exact cosine (compared through cross-multiplied
// integer squares), ties broken by ascending name.
std::vector<Ranked> brute_force_rank(const std::map<std::string, std::string>& docstrings, const std::string& query,
                                     int k);

struct RetrievalCase {
    std::map<std::string, std::string> docstrings;  // name -> docstring
    std::string query;
    int k;
};

std::vector<RetrievalCase> random_retrieval_cases(int count, std::uint64_t seed);

}  // namespace oracle
