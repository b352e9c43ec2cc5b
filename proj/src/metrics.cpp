#include "dynact/metrics.hpp"
#include "dynact/executor.hpp"
#include "dynact/minipy.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>

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

std::string lower(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::optional<double> as_number(std::string_view text)
{
    static const std::vector<std::string_view> strip = {",", "$", "%", "€", "£", "¥"};
    std::string s(text);
    for (auto sym : strip)
        for (auto p = s.find(sym); p != std::string::npos; p = s.find(sym))
            s.erase(p, sym.size());
    s = trim(s);
    static const std::regex decimal(R"([+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)");
    if (!std::regex_match(s, decimal))
        return std::nullopt;
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

bool scalar_equal(std::string_view a, std::string_view b)
{
    auto na = as_number(a), nb = as_number(b);
    if (na && nb)
        return *na == *nb;
    return lower(trim(a)) == lower(trim(b));
}

std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ';') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace

bool score_answer(std::string_view predicted, std::string_view expected)
{
    std::string p = trim(predicted), e = trim(expected);
    if (p.empty() || e.empty())
        return false;
    auto np = as_number(p), ne = as_number(e);
    if (np && ne)
        return *np == *ne;
    if (e.find_first_of(",;") != std::string::npos) {
        auto pe = split_list(p), ee = split_list(e);
        if (pe.size() != ee.size())
            return false;
        for (std::size_t i = 0; i < pe.size(); ++i)
            if (!scalar_equal(pe[i], ee[i]))
                return false;
        return true;
    }
    return lower(p) == lower(e);
}

TaskCoverage coverage_of_trajectory(const Trajectory& traj, const ActionNames& start_action_names)
{
    if (traj.steps.empty())
        throw Error(fmt::format("trajectory {} has no steps", traj.task_id));
    if (!traj.success)
        throw MissingLabel(fmt::format("trajectory {} has no expected answer to judge success", traj.task_id));
    TaskCoverage out;
    out.success = *traj.success;
    out.steps = static_cast<int>(traj.steps.size());
    out.start_set_size = start_action_names.size();
    for (const auto& s : traj.steps) {
        bool novel = false;
        for (const auto& f : s.defined_functions)
            if (!start_action_names.count(f.name))
                novel = true;
        if (novel)
            ++out.novel_steps;
    }
    double frac = static_cast<double>(out.novel_steps) / static_cast<double>(out.steps);
    out.coverage = 1.0 - frac;
    out.literal = out.success ? 1.0 - frac : 1.0;
    return out;
}

CoverageReport coverage_report(const std::vector<Trajectory>& trajectories, std::size_t action_set_size)
{
    CoverageReport r;
    r.action_set_size = action_set_size;
    double sum_success = 0.0, sum_literal = 0.0;
    int n_success = 0, n_labeled = 0;
    for (const auto& t : trajectories) {
        if (t.steps.empty() || !t.success) {
            r.skipped.push_back(t.task_id);
            continue;
        }
        auto c = coverage_of_trajectory(t, t.start_action_names);
        ++n_labeled;
        sum_literal += c.literal;
        if (c.success) {
            ++n_success;
            sum_success += c.coverage;
        }
        r.per_task[t.task_id] = c;
    }
    if (n_labeled > 0)
        r.mean_literal = sum_literal / n_labeled;
    if (n_success > 0)
        r.mean_success_conditioned = sum_success / n_success;
    return r;
}

std::vector<CurvePoint> coverage_curve(const CoverageReport& report)
{
    std::map<std::size_t, std::pair<double, std::size_t>> groups;
    for (const auto& [id, c] : report.per_task) {
        if (!c.success)
            continue;
        auto& g = groups[c.start_set_size];
        g.first += c.coverage;
        ++g.second;
    }
    std::vector<CurvePoint> out;
    for (const auto& [size, g] : groups)
        out.push_back(CurvePoint{size, g.first / static_cast<double>(g.second), g.second});
    return out;
}

ComplexitySummary complexity_summary(const std::vector<ActionRecord>& records)
{
    ComplexitySummary out;
    std::map<std::string, std::pair<double, int>> sums;
    for (const auto& r : records) {
        if (r.origin == Origin::human && is_framework_hook(r.name))
            continue;
        int c = 0;
        if (r.complexity) {
            c = *r.complexity;
        } else {
            try {
                c = minipy::cyclomatic_complexity(r.source);
            } catch (const AnalysisError& e) {
                out.errors.push_back(fmt::format("{}: {}", r.name, e.what()));
                continue;
            }
        }
        std::string origin(to_string(r.origin));
        sums[origin].first += c;
        sums[origin].second += 1;
        out.histogram_by_origin[origin][c] += 1;
    }
    for (const char* origin : {"human", "generated"}) {
        auto it = sums.find(origin);
        if (it == sums.end() || it->second.second == 0)
            out.by_origin[origin] = std::nullopt;
        else
            out.by_origin[origin] = it->second.first / it->second.second;
    }
    out.mean = out.by_origin["generated"];
    out.histogram = out.histogram_by_origin["generated"];
    return out;
}

}  // namespace dynact
