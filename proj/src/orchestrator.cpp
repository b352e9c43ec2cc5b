#include "dynact/orchestrator.hpp"
#include "dynact/metrics.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <thread>

#include <fmt/format.h>

namespace dynact {

namespace {

constexpr int max_provider_attempts = 4;  // first call plus three retries

std::string observation_message(const Step& s)
{
    return fmt::format("Observation:\n{}", s.observation.empty() ? "(no output)" : s.observation);
}

}  // namespace

void real_sleep(std::chrono::seconds s)
{
    std::this_thread::sleep_for(s);
}

std::string task_message(const TaskSpec& task)
{
    std::string msg = fmt::format("Task: {}", task.question);
    if (!task.attachments.empty()) {
        msg += "\n\nAttached files:";
        for (const auto& a : task.attachments) {
            std::error_code ec;
            auto abs = std::filesystem::absolute(a, ec);
            msg += "\n- " + (ec ? a : abs.lexically_normal().string());
        }
    }
    return msg;
}

std::vector<ChatMessage> build_messages(const std::string& system_prompt, const TaskSpec& task,
                                        const std::vector<Step>& history)
{
    std::vector<ChatMessage> msgs;
    msgs.push_back({Role::system, system_prompt});
    msgs.push_back({Role::user, task_message(task)});
    for (const auto& s : history) {
        msgs.push_back({Role::assistant, render_assistant_turn(s.thought, s.code)});
        msgs.push_back({Role::user, observation_message(s)});
    }
    return msgs;
}

Step mark_novelty(Step step, const ActionNames& start_action_names)
{
    step.is_novel = std::any_of(step.defined_functions.begin(), step.defined_functions.end(),
                                [&](const ActionRecord& r) { return !start_action_names.count(r.name); });
    return step;
}

std::vector<std::string> generation_policy_violations(const AnalyzeResult& analysis, const ActionNames& human_names)
{
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& d : analysis.definitions)
        if (seen.insert("def " + d).second)
            out.push_back(d == "<lambda>" ? "lambda" : "def " + d);
    for (const auto& c : analysis.calls)
        if (!human_names.count(c) && seen.insert("call " + c).second)
            out.push_back(c);
    return out;
}

CallbackReply handle_retrieval_callback(const std::string& query, std::optional<int> k, const ActionLibrary& library,
                                        const EmbeddingIndex& index, int default_k)
{
    CallbackReply reply;
    int kk = k.value_or(default_k);
    for (const auto& hit : index.retrieve(query, kk)) {
        auto rec = library.find(hit.name);
        if (!rec || rec->origin != Origin::generated)
            continue;
        reply.results.push_back(RetrievalHit{rec->name, rec->docstring, rec->source, hit.score});
    }
    if (reply.results.empty()) {
        reply.text = fmt::format("No relevant actions found for \"{}\".", query);
        return reply;
    }
    reply.text = fmt::format("Found {} relevant action(s) for \"{}\"; they can be called from the next step.\n",
                             reply.results.size(), query);
    for (const auto& r : reply.results)
        reply.text += fmt::format("\n# {} (score {:.4f})\n{}\n", r.name, r.score, r.source);
    return reply;
}

Trajectory run_task(const TaskSpec& task, const RunConfig& config, LoopContext& ctx)
{
    validate_config(config);
    Trajectory traj;
    traj.task_id = task.task_id;
    traj.config_snapshot = config;
    traj.start_action_names = ctx.library.snapshot_names();

    ActionNames human_names;
    for (const auto& a : ctx.library.human_actions())
        human_names.insert(a.name);
    const std::string system_prompt = build_system_prompt(ctx.library.human_actions());
    const bool may_accumulate = config.phase == Phase::train && config.flags.accumulate;

    ctx.executor.reset();
    std::vector<RetrievalHit> retrieved;
    ctx.executor.set_retrieval_handler([&](const std::string& q, std::optional<int> k) {
        auto reply = handle_retrieval_callback(q, k, ctx.library, ctx.index, config.retrieval_k);
        retrieved.insert(retrieved.end(), reply.results.begin(), reply.results.end());
        return reply;
    });
    const auto limit = static_cast<std::size_t>(config.observation_limit_chars);

    for (int index = 1; index <= config.max_steps; ++index) {
        auto messages = build_messages(system_prompt, task, traj.steps);

        std::optional<std::string> response;
        for (int attempt = 1; attempt <= max_provider_attempts; ++attempt) {
            try {
                response = ctx.chat.complete(messages, RequestKey{task.task_id, index});
                break;
            } catch (const TranscriptExhausted& e) {
                traj.abort_reason = e.what();
                break;
            } catch (const ProviderError& e) {
                if (attempt == max_provider_attempts) {
                    traj.abort_reason = fmt::format("provider failed after {} attempts: {}", attempt, e.what());
                    break;
                }
                ctx.log(fmt::format("provider error on task {} step {} (attempt {}): {}", task.task_id, index,
                                    attempt, e.what()));
                ctx.sleep(std::chrono::seconds(1 << (attempt - 1)));
            }
        }
        if (!response)
            break;

        auto parsed = parse_response(*response);
        Step step;
        step.index = index;
        step.thought = parsed.thought;

        if (!parsed.code) {
            step.status = StepStatus::parse_error;
            step.observation = parse_error_observation;
            traj.steps.push_back(std::move(step));
            continue;
        }
        step.code = *parsed.code;

        if (!config.flags.allow_generation) {
            auto analysis = ctx.executor.analyze(step.code);
            if (!analysis.ok) {
                ExecResult failed;
                failed.ok = false;
                failed.error = analysis.error;
                step.status = StepStatus::exec_error;
                step.observation = to_observation(failed, limit);
                traj.steps.push_back(std::move(step));
                continue;
            }
            auto bad = generation_policy_violations(analysis, human_names);
            if (!bad.empty()) {
                std::string list;
                for (const auto& b : bad)
                    list += (list.empty() ? "" : ", ") + b;
                step.status = StepStatus::policy_violation;
                step.observation = fmt::format(
                    "PolicyViolation: the code was not executed. Only the listed actions may be called and no new "
                    "functions may be defined. Offending: {}",
                    list);
                traj.steps.push_back(std::move(step));
                continue;
            }
        }

        retrieved.clear();
        ExecResult res = ctx.executor.execute(step.code, config.step_timeout_s);
        std::string extra;
        for (const auto& hit : retrieved) {
            auto loaded = ctx.executor.load(hit.source);
            if (!loaded.ok)
                extra += fmt::format("\n[could not load retrieved action {}: {}]", hit.name,
                                     loaded.error ? loaded.error->message : "unknown error");
        }
        retrieved.clear();

        if (res.ok)
            step.status = StepStatus::ok;
        else if (res.error && res.error->type == "Timeout")
            step.status = StepStatus::timeout;
        else
            step.status = StepStatus::exec_error;
        step.observation = to_observation(res, limit) + extra;

        if (res.ok) {
            for (const auto& f : res.defined_functions) {
                ActionRecord r;
                r.name = f.name;
                r.docstring = f.docstring;
                r.source = f.source;
                r.origin = Origin::generated;
                r.created_by_task = task.task_id;
                r.complexity = f.complexity;
                step.defined_functions.push_back(std::move(r));
            }
            step.final_answer = res.final_answer;
        }
        step = mark_novelty(std::move(step), traj.start_action_names);

        if (res.ok && may_accumulate && !step.defined_functions.empty()) {
            try {
                auto acc = ctx.library.accumulate(step, task.task_id);
                for (const auto& e : acc.storage_errors)
                    ctx.log(fmt::format("storage error while accumulating: {}", e));
                for (const auto& rec : acc.accepted) {
                    try {
                        ctx.index.index_action(rec);
                    } catch (const Error& e) {
                        ctx.log(fmt::format("indexing {} failed: {}", rec.name, e.what()));
                    }
                }
            } catch (const FrozenLibrary& e) {
                ctx.log(e.what());
            }
        }

        bool done = step.final_answer.has_value();
        traj.steps.push_back(std::move(step));
        if (done) {
            traj.final_answer = traj.steps.back().final_answer;
            break;
        }
    }

    ctx.executor.set_retrieval_handler(nullptr);
    if (task.expected_answer)
        traj.success = traj.final_answer && score_answer(*traj.final_answer, *task.expected_answer);
    return traj;
}

}  // namespace dynact
