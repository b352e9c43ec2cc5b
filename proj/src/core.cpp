#include "dynact/core.hpp"

#include <array>
#include <chrono>
#include <ctime>

#include <fmt/format.h>

namespace dynact {

const RunConfig& validate_config(const RunConfig& cfg)
{
    if (cfg.max_steps <= 0)
        throw ConfigError(fmt::format("max_steps must be positive (got {})", cfg.max_steps));
    if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0))
        throw ConfigError(fmt::format("temperature must lie in [0, 2] (got {})", cfg.temperature));
    if (cfg.retrieval_k <= 0)
        throw ConfigError(fmt::format("retrieval_k must be positive (got {})", cfg.retrieval_k));
    if (cfg.step_timeout_s <= 0)
        throw ConfigError(fmt::format("step_timeout_s must be positive (got {})", cfg.step_timeout_s));
    if (cfg.observation_limit_chars <= 0)
        throw ConfigError(fmt::format("observation_limit_chars must be positive (got {})",
                                      cfg.observation_limit_chars));
    if (!cfg.flags.allow_generation && cfg.flags.accumulate)
        throw ConfigError("accumulate requires allow_generation: accumulated actions must be implementable");
    if (cfg.phase == Phase::test && cfg.flags.accumulate)
        throw ConfigError("accumulate must be false in the test phase");
    return cfg;
}

bool is_identifier(std::string_view name)
{
    if (name.empty())
        return false;
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    if (!alpha(name.front()))
        return false;
    for (char c : name)
        if (!alpha(c) && !(c >= '0' && c <= '9'))
            return false;
    return true;
}

std::string utc_timestamp()
{
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf.data();
}

std::string_view to_string(Origin origin)
{
    return origin == Origin::human ? "human" : "generated";
}

std::string_view to_string(StepStatus status)
{
    switch (status) {
    case StepStatus::ok: return "ok";
    case StepStatus::exec_error: return "exec_error";
    case StepStatus::parse_error: return "parse_error";
    case StepStatus::timeout: return "timeout";
    case StepStatus::policy_violation: return "policy_violation";
    }
    return "ok";
}

std::string_view to_string(Phase phase)
{
    return phase == Phase::train ? "train" : "test";
}

Origin origin_from_string(std::string_view text)
{
    if (text == "human")
        return Origin::human;
    if (text == "generated")
        return Origin::generated;
    throw Error(fmt::format("unknown origin '{}'", text));
}

StepStatus step_status_from_string(std::string_view text)
{
    for (auto s : {StepStatus::ok, StepStatus::exec_error, StepStatus::parse_error, StepStatus::timeout,
                   StepStatus::policy_violation})
        if (to_string(s) == text)
            return s;
    throw Error(fmt::format("unknown step status '{}'", text));
}

Phase phase_from_string(std::string_view text)
{
    if (text == "train")
        return Phase::train;
    if (text == "test")
        return Phase::test;
    throw ConfigError(fmt::format("phase must be 'train' or 'test' (got '{}')", text));
}

}  // namespace dynact
