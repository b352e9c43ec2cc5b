#pragma once

// Chat providers, the agent's system prompt, and parsing of model output into
// a thought and one code block.

#include "dynact/core.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dynact {

class PromptError : public Error {
public:
    using Error::Error;
};

class TranscriptExhausted : public Error {
public:
    using Error::Error;
};

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

enum class ProviderKind { http_chat, scripted };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::scripted;
    std::optional<std::string> endpoint_url;
    std::string model_name = "gpt-4o";
    double temperature = 0.5;
    std::optional<std::filesystem::path> transcript_path;
    std::optional<std::filesystem::path> record_path;
    // Environment variable holding the bearer token for the chat endpoint.
    std::string api_key_env = "DYNACT_API_KEY";
};

/// Throws ConfigError when kind-specific fields are missing.
void validate_provider_config(const ProviderConfig& cfg);

// Identifies the request for transcript lookup and recording.
struct RequestKey {
    std::string task_id;
    int step = 1;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// Returns the assistant text. Throws ProviderError or TranscriptExhausted.
    virtual std::string complete(const std::vector<ChatMessage>& messages, const RequestKey& key) = 0;
};

/// Replays responses from a JSONL transcript of {task_id, step, response}.
class ScriptedProvider final : public ChatProvider {
public:
    explicit ScriptedProvider(const std::filesystem::path& transcript);
    explicit ScriptedProvider(std::map<std::pair<std::string, int>, std::string> entries);
    std::string complete(const std::vector<ChatMessage>& messages, const RequestKey& key) override;
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::pair<std::string, int>, std::string> entries_;
};

/// OpenAI-compatible chat endpoint: POST {model, temperature, messages},
/// answer read from choices[0].message.content.
class HttpChatProvider final : public ChatProvider {
public:
    explicit HttpChatProvider(ProviderConfig cfg);
    std::string complete(const std::vector<ChatMessage>& messages, const RequestKey& key) override;

private:
    ProviderConfig cfg_;
};

/// Appends {task_id, step, response, messages} to a JSONL file after each
/// successful completion; the file doubles as a transcript.
class RecordingProvider final : public ChatProvider {
public:
    RecordingProvider(std::unique_ptr<ChatProvider> inner, std::filesystem::path record_path);
    std::string complete(const std::vector<ChatMessage>& messages, const RequestKey& key) override;

private:
    std::unique_ptr<ChatProvider> inner_;
    std::filesystem::path path_;
    std::mutex mutex_;
};

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& cfg);

/// "name(params)" taken from the def line of an action's source.
std::string action_signature(const ActionRecord& action);

/// System prompt listing every human action's signature and docstring plus
/// the response-format rules. Throws PromptError for an undocumented action.
std::string build_system_prompt(const std::vector<ActionRecord>& human_actions);

struct ParsedResponse {
    std::string thought;
    std::optional<std::string> code;

    bool operator==(const ParsedResponse&) const = default;
};

/// Thought is the trimmed text before the first fence; code is the body of
/// the first complete ``` block. Never throws.
ParsedResponse parse_response(std::string_view text);

/// Assistant message replayed into the history for one step.
std::string render_assistant_turn(const std::string& thought, const std::string& code);

}  // namespace dynact
