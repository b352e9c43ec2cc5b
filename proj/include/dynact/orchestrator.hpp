#pragma once

// The agent loop: prompt, sample a thought and code, execute, observe,
// accumulate, until the terminal action fires or the step budget runs out.

#include "dynact/core.hpp"
#include "dynact/executor.hpp"
#include "dynact/library.hpp"
#include "dynact/llm.hpp"
#include "dynact/retrieval.hpp"

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace dynact {

inline constexpr const char* parse_error_observation = "No code block found. Respond with one fenced code block.";

// Waits between provider retries; replaceable so tests need not sleep.
using Sleeper = std::function<void(std::chrono::seconds)>;

void real_sleep(std::chrono::seconds s);

struct LoopContext {
    ActionLibrary& library;
    EmbeddingIndex& index;
    Executor& executor;
    ChatProvider& chat;
    Sleeper sleep = real_sleep;
    // Receives warnings such as storage or indexing failures.
    std::function<void(const std::string&)> log = [](const std::string&) {};
};

/// Runs one task to completion. Provider failures are retried three times
/// (1 s, 2 s, 4 s) and then abort the trajectory with abort_reason set;
/// executor failures become observations.
Trajectory run_task(const TaskSpec& task, const RunConfig& config, LoopContext& ctx);

/// is_novel = some defined function name is absent from the start set.
Step mark_novelty(Step step, const ActionNames& start_action_names);

/// Serves get_relevant_actions: top-k generated actions with their sources
/// and the observation text shown to the agent. `k` defaults to `default_k`.
CallbackReply handle_retrieval_callback(const std::string& query, std::optional<int> k, const ActionLibrary& library,
                                        const EmbeddingIndex& index, int default_k);

/// AI-off policy: any function definition (def or lambda) or any call whose
/// target is not a human action. Returns the offending names, empty if none.
std::vector<std::string> generation_policy_violations(const AnalyzeResult& analysis, const ActionNames& human_names);

/// System prompt, task message, then alternating assistant/user turns for
/// every step in `history`.
std::vector<ChatMessage> build_messages(const std::string& system_prompt, const TaskSpec& task,
                                        const std::vector<Step>& history);

std::string task_message(const TaskSpec& task);

}  // namespace dynact
