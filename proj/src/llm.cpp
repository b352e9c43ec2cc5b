#include "dynact/llm.hpp"
#include "dynact/http.hpp"
#include "dynact/serialize.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

namespace dynact {

namespace {

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

Json messages_json(const std::vector<ChatMessage>& messages)
{
    Json arr = Json::array();
    for (const auto& m : messages)
        arr.push_back(Json{{"role", to_string(m.role)}, {"content", m.content}});
    return arr;
}

}  // namespace

std::string_view to_string(Role role)
{
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

void validate_provider_config(const ProviderConfig& cfg)
{
    if (cfg.kind == ProviderKind::http_chat && (!cfg.endpoint_url || cfg.endpoint_url->empty()))
        throw ConfigError("the http provider requires an endpoint URL");
    if (cfg.kind == ProviderKind::scripted && !cfg.transcript_path)
        throw ConfigError("the scripted provider requires a transcript path");
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

ScriptedProvider::ScriptedProvider(const std::filesystem::path& transcript)
{
    std::ifstream in(transcript);
    if (!in)
        throw ConfigError(fmt::format("cannot read transcript {}", transcript.string()));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("task_id") || !j.contains("step") ||
            !j.contains("response"))
            throw ConfigError(fmt::format("{}:{}: expected {{task_id, step, response}}", transcript.string(), lineno));
        auto key = std::make_pair(j["task_id"].get<std::string>(), j["step"].get<int>());
        // A later line for the same key replaces the earlier one.
        entries_[key] = j["response"].get<std::string>();
    }
}

ScriptedProvider::ScriptedProvider(std::map<std::pair<std::string, int>, std::string> entries)
    : entries_(std::move(entries))
{
}

std::string ScriptedProvider::complete(const std::vector<ChatMessage>&, const RequestKey& key)
{
    auto it = entries_.find({key.task_id, key.step});
    if (it == entries_.end())
        throw TranscriptExhausted(
            fmt::format("transcript has no response for task {} step {}", key.task_id, key.step));
    return it->second;
}

HttpChatProvider::HttpChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg))
{
    validate_provider_config(cfg_);
}

std::string HttpChatProvider::complete(const std::vector<ChatMessage>& messages, const RequestKey&)
{
    Json body{{"model", cfg_.model_name}, {"temperature", cfg_.temperature}, {"messages", messages_json(messages)}};
    std::map<std::string, std::string> headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        headers["Authorization"] = fmt::format("Bearer {}", key);
    HttpResponse res;
    try {
        res = http_post(*cfg_.endpoint_url, body.dump(), "application/json", headers);
    } catch (const HttpError& e) {
        throw ProviderError(e.what());
    }
    if (res.status < 200 || res.status >= 300)
        throw ProviderError(fmt::format("chat endpoint returned HTTP {}: {}", res.status, res.body.substr(0, 500)),
                            res.status);
    Json j = Json::parse(res.body, nullptr, false);
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception&) {
        throw ProviderError(fmt::format("unexpected chat response: {}", res.body.substr(0, 500)), res.status);
    }
}

RecordingProvider::RecordingProvider(std::unique_ptr<ChatProvider> inner, std::filesystem::path record_path)
    : inner_(std::move(inner)), path_(std::move(record_path))
{
}

std::string RecordingProvider::complete(const std::vector<ChatMessage>& messages, const RequestKey& key)
{
    std::string response = inner_->complete(messages, key);
    Json j{{"task_id", key.task_id}, {"step", key.step}, {"response", response}, {"messages", messages_json(messages)}};
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out || !(out << j.dump() << '\n'))
        throw ProviderError(fmt::format("cannot append to record file {}", path_.string()));
    return response;
}

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& cfg)
{
    validate_provider_config(cfg);
    std::unique_ptr<ChatProvider> p;
    if (cfg.kind == ProviderKind::scripted)
        p = std::make_unique<ScriptedProvider>(*cfg.transcript_path);
    else
        p = std::make_unique<HttpChatProvider>(cfg);
    if (cfg.record_path)
        p = std::make_unique<RecordingProvider>(std::move(p), *cfg.record_path);
    return p;
}

// ---------------------------------------------------------------------------
// Prompt
// ---------------------------------------------------------------------------

std::string action_signature(const ActionRecord& action)
{
    const std::string& src = action.source;
    auto def = src.find("def ");
    if (def == std::string::npos)
        return action.name + "(...)";
    auto open = src.find('(', def);
    if (open == std::string::npos)
        return action.name + "(...)";
    int depth = 0;
    std::size_t i = open;
    for (; i < src.size(); ++i) {
        if (src[i] == '(')
            ++depth;
        else if (src[i] == ')' && --depth == 0)
            break;
    }
    std::string params = src.substr(open, i - open + 1);
    std::string flat;
    bool space = false;
    for (char c : params) {
        if (c == '\n' || c == '\t' || c == ' ') {
            space = true;
            continue;
        }
        if (space && !flat.empty() && flat.back() != '(' && c != ')')
            flat += ' ';
        space = false;
        flat += c;
    }
    return action.name + flat;
}

std::string build_system_prompt(const std::vector<ActionRecord>& human_actions)
{
    std::string tools;
    for (const auto& a : human_actions) {
        if (trim(a.docstring).empty())
            throw PromptError(fmt::format("action {} has no docstring", a.name));
        tools += fmt::format("### {}\n{}\n", a.name, action_signature(a));
        std::string doc = a.docstring;
        std::size_t pos = 0;
        while (pos <= doc.size()) {
            auto nl = doc.find('\n', pos);
            std::string line = doc.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
            tools += line.empty() ? "\n" : "    " + line + "\n";
            if (nl == std::string::npos)
                break;
            pos = nl + 1;
        }
        tools += "\n";
    }
    if (tools.empty())
        tools = "(no predefined actions)\n\n";

    return fmt::format(
        R"(You are an agent that solves tasks by writing and running Python code.

Each turn, respond with one short paragraph of reasoning followed by exactly one
fenced code block:

Thought paragraph explaining what you will do next.
```python
# code to run
```

The code runs in a persistent Python session: variables, imports and
functions you define remain available in later turns. Whatever the code
prints, or the value of its last expression, is returned to you as the
observation, as are error messages.

You may define new functions whenever the available actions are not enough.
Give every function you define a docstring describing its purpose so it can be
reused later. Keep functions general rather than specific to this task.

Previously generated actions can be found with
get_relevant_actions(query, k); matching actions are printed and become
callable in the next turn.

When you know the answer, call submit_final_answer(answer) with just the
answer (a number, a word or a short phrase, without units unless asked).

## Available actions

{})",
        tools);
}

ParsedResponse parse_response(std::string_view text)
{
    ParsedResponse out;
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        lines.push_back(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
    auto strip_cr = [](std::string_view l) {
        while (!l.empty() && (l.back() == '\r' || l.back() == ' ' || l.back() == '\t'))
            l.remove_suffix(1);
        return l;
    };

    std::optional<std::size_t> open;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!open) {
            if (lines[i].substr(0, 3) == "```")
                open = i;
            continue;
        }
        if (strip_cr(lines[i]) == "```") {
            std::string thought;
            for (std::size_t k = 0; k < *open; ++k) {
                thought += lines[k];
                thought += '\n';
            }
            out.thought = trim(thought);
            std::string code;
            for (std::size_t k = *open + 1; k < i; ++k) {
                if (k > *open + 1)
                    code += '\n';
                std::string_view l = lines[k];
                if (!l.empty() && l.back() == '\r')
                    l.remove_suffix(1);
                code += l;
            }
            out.code = std::move(code);
            return out;
        }
    }
    out.thought = trim(text);
    return out;
}

std::string render_assistant_turn(const std::string& thought, const std::string& code)
{
    if (code.empty())
        return thought.empty() ? "(empty response)" : thought;
    if (thought.empty())
        return fmt::format("```python\n{}\n```", code);
    return fmt::format("{}\n```python\n{}\n```", thought, code);
}

}  // namespace dynact
