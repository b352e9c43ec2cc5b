#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dynact/executor.hpp"
#include "dynact/harness.hpp"
#include "dynact/library.hpp"
#include "dynact/llm.hpp"
#include "dynact/metrics.hpp"
#include "dynact/minipy.hpp"
#include "dynact/retrieval.hpp"
#include "dynact/serialize.hpp"

#include <sstream>

namespace py = pybind11;
using namespace dynact;

namespace {

py::object to_python(const Json& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

Json from_python(const py::handle& obj)
{
    return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

class PyMockExecutor {
public:
    explicit PyMockExecutor(bool plugins)
    {
        auto human = builtin_actions();
        if (plugins)
            for (auto& p : shipped_plugins())
                human.push_back(p);
        ex_ = start_mock_session(human);
    }

    py::object execute(const std::string& code, int timeout_s)
    {
        ExecResult r;
        {
            py::gil_scoped_release release;
            r = ex_->execute(code, timeout_s);
        }
        return to_python(Json(r));
    }

    std::string observe(const std::string& code, int timeout_s, std::size_t limit)
    {
        py::gil_scoped_release release;
        return to_observation(ex_->execute(code, timeout_s), limit);
    }

    void set_retrieval_handler(py::function fn)
    {
        ex_->set_retrieval_handler([fn](const std::string& query, std::optional<int> k) {
            py::gil_scoped_acquire acquire;
            CallbackReply reply;
            reply.text = py::str(fn(query, k));
            return reply;
        });
    }

    void reset() { ex_->reset(); }

private:
    std::unique_ptr<Executor> ex_;
};

}  // namespace

PYBIND11_MODULE(_dynact, m)
{
    m.doc() = "Native core of the dynact agent runtime";

    py::register_exception<Error>(m, "DynactError");

    m.def(
        "parse_response",
        [](const std::string& text) {
            auto p = parse_response(text);
            return py::make_tuple(p.thought, p.code);
        },
        py::arg("text"), "Split a model response into (thought, code or None).");

    m.def("score_answer", &score_answer, py::arg("predicted"), py::arg("expected"));

    m.def(
        "embed", [](const std::string& text) { return embed_deterministic(text); }, py::arg("text"),
        "Unit-norm 256-bin trigram embedding.");

    m.def(
        "rank",
        [](const std::map<std::string, std::string>& docstrings, const std::string& query, int k) {
            EmbeddingEntries entries;
            for (const auto& [name, doc] : docstrings)
                entries[name] = embed_deterministic(doc);
            std::vector<std::pair<std::string, double>> out;
            for (const auto& s : rank(entries, embed_deterministic(query), k))
                out.emplace_back(s.name, s.score);
            return out;
        },
        py::arg("docstrings"), py::arg("query"), py::arg("k") = 10);

    m.def(
        "coverage",
        [](const py::object& trajectory, const std::set<std::string>& start) {
            auto t = from_python(trajectory).get<Trajectory>();
            auto c = coverage_of_trajectory(t, ActionNames(start.begin(), start.end()));
            return py::make_tuple(c.coverage, c.literal, c.novel_steps);
        },
        py::arg("trajectory"), py::arg("start_action_names"),
        "(coverage, literal, novel_steps) for a trajectory dict.");

    m.def("cyclomatic_complexity", [](const std::string& src) { return minipy::cyclomatic_complexity(src); },
          py::arg("function_source"));

    py::class_<PyMockExecutor>(m, "MockExecutor")
        .def(py::init<bool>(), py::arg("plugins") = false)
        .def("execute", &PyMockExecutor::execute, py::arg("code"), py::arg("timeout_s") = 120)
        .def("observe", &PyMockExecutor::observe, py::arg("code"), py::arg("timeout_s") = 120,
             py::arg("limit") = 8192)
        .def("set_retrieval_handler", &PyMockExecutor::set_retrieval_handler, py::arg("handler"))
        .def("reset", &PyMockExecutor::reset);

    m.def(
        "run",
        [](const py::dict& options) {
            RunOptions o;
            merge_options(o, from_python(options));
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cmd_run(o, out, err);
            }
            return py::make_tuple(code, out.str() + err.str());
        },
        py::arg("options"), "Run a dataset; options use the config-file keys. Returns (exit_code, output).");

    m.def(
        "report",
        [](const std::string& run_dir) {
            std::ostringstream out, err;
            int code = cmd_report(run_dir, out, err);
            return py::make_tuple(code, out.str() + err.str());
        },
        py::arg("run_dir"));
}
