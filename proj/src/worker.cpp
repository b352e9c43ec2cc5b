#include "dynact/executor.hpp"
#include "dynact/minipy.hpp"

#include <fmt/format.h>

#include <istream>
#include <ostream>

namespace dynact {

namespace {

Json functions_json(const std::vector<minipy::FunctionInfo>& fns)
{
    Json arr = Json::array();
    for (const auto& f : fns)
        arr.push_back(DefinedFunction{f.name, f.docstring, f.source, f.complexity});
    return arr;
}

std::string format_hits(const Json& results)
{
    if (!results.is_array() || results.empty())
        return "No relevant actions found.";
    std::string text;
    for (const auto& r : results)
        text += fmt::format("# {} (score {:.4f})\n{}\n\n", r.value("name", std::string{}), r.value("score", 0.0),
                            r.value("source", std::string{}));
    return text;
}

class Worker {
public:
    Worker(std::istream& in, std::ostream& out)
        : in_(in), out_(out), interp_(minipy::Hooks{[this](const std::string& q, std::optional<std::int64_t> k) {
              return callback(q, k);
          }})
    {
    }

    int run()
    {
        std::string line;
        while (std::getline(in_, line)) {
            if (line.empty())
                continue;
            Json reply;
            std::optional<int> exit_code;
            try {
                reply = handle(line, exit_code);
            } catch (const std::exception& e) {
                Json j = Json::parse(line, nullptr, false);
                std::string id = j.is_object() && j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "";
                reply = Json{{"id", id},
                             {"ok", false},
                             {"stdout", ""},
                             {"error", ExecErrorInfo{"ProtocolError", e.what(), ""}},
                             {"defined_functions", Json::array()}};
            }
            if (exit_code && reply.is_null()) {
                out_.flush();
                return *exit_code;
            }
            out_ << encode_line(reply);
            out_.flush();
            if (exit_code)
                return *exit_code;
        }
        return 0;
    }

private:
    Json handle(const std::string& line, std::optional<int>& exit_code)
    {
        auto req = Json::parse(line).get<ExecRequest>();
        switch (req.op) {
        case Op::ping:
            return Json{{"id", req.id}, {"ok", true}, {"v", protocol_version}};
        case Op::shutdown:
            exit_code = 0;
            return Json{{"id", req.id}, {"ok", true}};
        case Op::reset:
            interp_.reset();
            return Json{{"id", req.id}, {"ok", true}};
        case Op::analyze: {
            Json r{{"id", req.id}, {"ok", true}, {"error", nullptr}};
            try {
                auto a = minipy::analyze(*req.code);
                r["defined_functions"] = functions_json(a.functions);
                r["definitions"] = a.all_definitions;
                r["calls"] = a.call_targets;
            } catch (const minipy::SyntaxError& e) {
                r["ok"] = false;
                r["error"] = ExecErrorInfo{"SyntaxError", e.what(), ""};
                r["defined_functions"] = Json::array();
            }
            return r;
        }
        case Op::exec:
        case Op::load: {
            auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(req.timeout_s);
            auto o = interp_.exec(*req.code, deadline, req.op == Op::exec);
            if (o.crashed) {
                // Behave like a real process calling os._exit: no reply.
                exit_code = o.exit_code;
                return nullptr;
            }
            ExecResult r;
            r.id = req.id;
            r.ok = o.ok;
            r.stdout_text = std::move(o.stdout_text);
            r.result_repr = std::move(o.result_repr);
            if (req.op == Op::exec)
                r.final_answer = std::move(o.final_answer);
            if (o.error)
                r.error = ExecErrorInfo{o.error->type, o.error->message, o.error->traceback};
            for (auto& f : o.defined_functions)
                r.defined_functions.push_back(DefinedFunction{f.name, f.docstring, f.source, f.complexity});
            if (o.timed_out)
                interp_.reset();
            return Json(r);
        }
        }
        return nullptr;
    }

    std::string callback(const std::string& query, std::optional<std::int64_t> k)
    {
        Json req{{"op", "callback"}, {"id", fmt::format("cb{}", ++callbacks_)}, {"kind", "retrieve"}, {"query", query}};
        req["k"] = k ? Json(*k) : Json(nullptr);
        out_ << encode_line(req);
        out_.flush();
        std::string line;
        if (!std::getline(in_, line))
            throw Error("input closed while waiting for the retrieval reply");
        Json reply = Json::parse(line, nullptr, false);
        if (!reply.is_object())
            throw Error("malformed retrieval reply");
        if (auto it = reply.find("error"); it != reply.end() && it->is_string())
            throw Error(it->get<std::string>());
        if (auto it = reply.find("text"); it != reply.end() && it->is_string())
            return it->get<std::string>();
        return format_hits(reply.value("results", Json::array()));
    }

    std::istream& in_;
    std::ostream& out_;
    minipy::Interpreter interp_;
    std::uint64_t callbacks_ = 0;
};

}  // namespace

int serve_worker(std::istream& in, std::ostream& out)
{
    Worker w(in, out);
    return w.run();
}

}  // namespace dynact
