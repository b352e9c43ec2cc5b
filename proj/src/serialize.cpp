#include "dynact/serialize.hpp"

namespace dynact {

namespace {

template <typename T>
Json opt(const std::optional<T>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

template <typename T>
void read_opt(const Json& j, const char* key, std::optional<T>& out)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null())
        out.reset();
    else
        out = it->get<T>();
}

}  // namespace

void to_json(Json& j, const TaskSpec& t)
{
    j = Json{{"task_id", t.task_id},
             {"question", t.question},
             {"attachments", t.attachments},
             {"expected_answer", opt(t.expected_answer)},
             {"level", opt(t.level)}};
}

void from_json(const Json& j, TaskSpec& t)
{
    t.task_id = j.at("task_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    t.attachments = j.value("attachments", std::vector<std::string>{});
    read_opt(j, "expected_answer", t.expected_answer);
    read_opt(j, "level", t.level);
}

void to_json(Json& j, const ActionRecord& r)
{
    j = Json{{"name", r.name},
             {"docstring", r.docstring},
             {"source", r.source},
             {"origin", to_string(r.origin)},
             {"created_by_task", opt(r.created_by_task)},
             {"created_at", r.created_at},
             {"complexity", opt(r.complexity)}};
    if (r.embedding)
        j["embedding"] = *r.embedding;
}

void from_json(const Json& j, ActionRecord& r)
{
    r.name = j.at("name").get<std::string>();
    r.docstring = j.value("docstring", std::string{});
    r.source = j.at("source").get<std::string>();
    r.origin = origin_from_string(j.value("origin", std::string{"generated"}));
    read_opt(j, "created_by_task", r.created_by_task);
    r.created_at = j.value("created_at", std::string{});
    read_opt(j, "embedding", r.embedding);
    read_opt(j, "complexity", r.complexity);
}

void to_json(Json& j, const Step& s)
{
    j = Json{{"index", s.index},
             {"thought", s.thought},
             {"code", s.code},
             {"observation", s.observation},
             {"status", to_string(s.status)},
             {"defined_functions", s.defined_functions},
             {"is_novel", s.is_novel},
             {"final_answer", opt(s.final_answer)}};
}

void from_json(const Json& j, Step& s)
{
    s.index = j.at("index").get<int>();
    s.thought = j.value("thought", std::string{});
    s.code = j.value("code", std::string{});
    s.observation = j.value("observation", std::string{});
    s.status = step_status_from_string(j.at("status").get<std::string>());
    s.defined_functions = j.value("defined_functions", std::vector<ActionRecord>{});
    s.is_novel = j.value("is_novel", false);
    read_opt(j, "final_answer", s.final_answer);
}

void to_json(Json& j, const AblationFlags& f)
{
    j = Json{{"accumulate", f.accumulate},
             {"allow_generation", f.allow_generation},
             {"load_initial_actions", f.load_initial_actions}};
}

void from_json(const Json& j, AblationFlags& f)
{
    f = AblationFlags{};
    f.accumulate = j.value("accumulate", f.accumulate);
    f.allow_generation = j.value("allow_generation", f.allow_generation);
    f.load_initial_actions = j.value("load_initial_actions", f.load_initial_actions);
}

void to_json(Json& j, const RunConfig& c)
{
    j = Json{{"max_steps", c.max_steps},
             {"temperature", c.temperature},
             {"retrieval_k", c.retrieval_k},
             {"flags", c.flags},
             {"phase", to_string(c.phase)},
             {"step_timeout_s", c.step_timeout_s},
             {"observation_limit_chars", c.observation_limit_chars}};
}

void from_json(const Json& j, RunConfig& c)
{
    c = RunConfig{};
    merge_config(c, j);
}

void merge_config(RunConfig& cfg, const Json& j)
{
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    cfg.max_steps = j.value("max_steps", cfg.max_steps);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.retrieval_k = j.value("retrieval_k", cfg.retrieval_k);
    cfg.step_timeout_s = j.value("step_timeout_s", cfg.step_timeout_s);
    cfg.observation_limit_chars = j.value("observation_limit_chars", cfg.observation_limit_chars);
    if (auto it = j.find("phase"); it != j.end())
        cfg.phase = phase_from_string(it->get<std::string>());
    // Flags may be nested under "flags" or given at top level.
    auto merge_flags = [&](const Json& src) {
        cfg.flags.accumulate = src.value("accumulate", cfg.flags.accumulate);
        cfg.flags.allow_generation = src.value("allow_generation", cfg.flags.allow_generation);
        cfg.flags.load_initial_actions = src.value("load_initial_actions", cfg.flags.load_initial_actions);
    };
    merge_flags(j);
    if (auto it = j.find("flags"); it != j.end() && it->is_object())
        merge_flags(*it);
}

void to_json(Json& j, const Trajectory& t)
{
    j = Json{{"task_id", t.task_id},
             {"steps", t.steps},
             {"final_answer", opt(t.final_answer)},
             {"success", opt(t.success)},
             {"config_snapshot", t.config_snapshot},
             {"start_action_names", t.start_action_names},
             {"abort_reason", opt(t.abort_reason)}};
}

void from_json(const Json& j, Trajectory& t)
{
    t.task_id = j.at("task_id").get<std::string>();
    t.steps = j.value("steps", std::vector<Step>{});
    read_opt(j, "final_answer", t.final_answer);
    read_opt(j, "success", t.success);
    t.config_snapshot = j.value("config_snapshot", RunConfig{});
    t.start_action_names = j.value("start_action_names", ActionNames{});
    read_opt(j, "abort_reason", t.abort_reason);
}

}  // namespace dynact
