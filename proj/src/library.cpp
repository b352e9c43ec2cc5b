#include "dynact/library.hpp"
#include "dynact/minipy.hpp"
#include "dynact/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace dynact {

namespace fs = std::filesystem;

namespace {

constexpr int manifest_version = 1;
constexpr const char* fixed_timestamp = "1970-01-01T00:00:00Z";

const char* submit_final_answer_source = R"(def submit_final_answer(answer):
    """Submits the final answer to the given problem."""
    return str(answer))";

const char* get_relevant_actions_source = R"(def get_relevant_actions(query, k=10):
    """Retrieve k most relevant generated actions given a query.

    Matching actions are printed with their score and source, and become
    callable from the next step on.
    """
    pass)";

const char* download_file_source = R"(def download_file(url, file_path=None):
    """Download a file at a given URL.

    Saves to file_path, or to downloads/<basename of the URL> when omitted,
    and returns the local path.
    """
    import os
    import urllib.request
    if file_path is None:
        name = os.path.basename(url.split("?")[0].rstrip("/")) or "download"
        os.makedirs("downloads", exist_ok=True)
        file_path = os.path.join("downloads", name)
    urllib.request.urlretrieve(url, file_path)
    return file_path)";

const char* inspect_file_as_text_source = R"(def inspect_file_as_text(file_path):
    """Read a file and return its content as Markdown text.

    Plain-text files are returned as is; CSV files become a Markdown table.
    """
    import csv
    import os
    if not os.path.exists(file_path):
        raise FileNotFoundError("No such file: " + file_path)
    if file_path.lower().endswith(".csv"):
        with open(file_path, newline="") as f:
            rows = list(csv.reader(f))
        if not rows:
            return ""
        width = max(len(r) for r in rows)
        rows = [r + [""] * (width - len(r)) for r in rows]
        lines = ["| " + " | ".join(rows[0]) + " |", "|" + "---|" * width]
        for r in rows[1:]:
            lines.append("| " + " | ".join(r) + " |")
        return "\n".join(lines)
    with open(file_path, encoding="utf-8") as f:
        return f.read())";

ActionRecord human_record(std::string source)
{
    auto fns = minipy::analyze(source).functions;
    ActionRecord r;
    r.name = fns.at(0).name;
    r.docstring = fns.at(0).docstring;
    r.complexity = fns.at(0).complexity;
    r.source = std::move(source);
    r.origin = Origin::human;
    r.created_at = fixed_timestamp;
    return r;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw StorageError(fmt::format("cannot read {}", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& content)
{
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << content) || !out.flush())
            throw StorageError(fmt::format("cannot write {}", tmp.string()));
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec)
        throw StorageError(fmt::format("cannot replace {}: {}", p.string(), ec.message()));
}

std::vector<fs::path> json_files(const fs::path& dir)
{
    std::vector<fs::path> out;
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        return out;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
        if (it->is_regular_file() && it->path().extension() == ".json")
            out.push_back(it->path());
    std::sort(out.begin(), out.end());
    return out;
}

ActionRecord parse_record_file(const fs::path& p)
{
    Json j = Json::parse(read_file(p), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error("not a JSON object");
    ActionRecord r;
    try {
        r = j.get<ActionRecord>();
    } catch (const std::exception& e) {
        throw Error(e.what());
    }
    if (!is_identifier(r.name))
        throw Error(fmt::format("invalid action name '{}'", r.name));
    if (r.source.empty())
        throw Error("empty source");
    if (p.stem().string() != r.name)
        throw Error(fmt::format("file name does not match action name '{}'", r.name));
    return r;
}

int catalog_position(const std::string& name)
{
    const auto& cat = initial_action_catalog();
    for (std::size_t i = 0; i < cat.size(); ++i)
        if (cat[i].name == name)
            return static_cast<int>(i);
    return static_cast<int>(cat.size());
}

}  // namespace

PluginError::PluginError(std::vector<std::string> problems)
    : Error([&] {
          std::string msg = "malformed plugin files:";
          for (const auto& p : problems)
              msg += "\n  " + p;
          return msg;
      }()),
      problems_(std::move(problems))
{
}

const std::vector<PluginInfo>& initial_action_catalog()
{
    static const std::vector<PluginInfo> catalog = {
        {"submit_final_answer", "Submits the final answer to the given problem.", true},
        {"get_relevant_actions", "Retrieve k most relevant generated actions given a query.", true},
        {"informational_web_search", "Perform an informational web search query then return the search results.",
         false},
        {"navigational_web_search",
         "Perform a navigational web search query then immediately navigate to the top result.", false},
        {"visit_page", "Visit a webpage at a given URL and return its text.", false},
        {"download_file", "Download a file at a given URL.", true},
        {"page_up", "Scroll the viewport up in the current webpage and return the new viewport content.", false},
        {"page_down", "Scroll the viewport down in the current webpage and return the new viewport content.", false},
        {"find_on_page_ctrl_f", "Scroll the viewport to the first occurrence of the search string.", false},
        {"find_next", "Scroll the viewport to next occurrence of the search string.", false},
        {"find_archived_url",
         "Given a url, searches the Wayback Machine and returns the archived version of the url that's closest in "
         "time to the desired date.",
         false},
        {"visualizer", "Answer question about a given image.", false},
        {"inspect_file_as_text", "Read a file and return its content as Markdown text.", true},
    };
    return catalog;
}

std::vector<ActionRecord> builtin_actions()
{
    return {human_record(submit_final_answer_source), human_record(get_relevant_actions_source)};
}

std::vector<ActionRecord> shipped_plugins()
{
    return {human_record(download_file_source), human_record(inspect_file_as_text_source)};
}

std::string encode_record_file(const ActionRecord& r)
{
    Json j = r;
    j.erase("embedding");
    return j.dump(2) + "\n";
}

void install_shipped_plugins(const fs::path& storage_dir)
{
    std::error_code ec;
    fs::create_directories(storage_dir / "plugins", ec);
    if (ec)
        throw StorageError(fmt::format("cannot create {}: {}", (storage_dir / "plugins").string(), ec.message()));
    for (const auto& r : shipped_plugins())
        write_file_atomic(storage_dir / "plugins" / (r.name + ".json"), encode_record_file(r));
}

// ---------------------------------------------------------------------------
// ActionLibrary
// ---------------------------------------------------------------------------

ActionLibrary::ActionLibrary(ActionLibrary&& other) noexcept
{
    *this = std::move(other);
}

ActionLibrary& ActionLibrary::operator=(ActionLibrary&& other) noexcept
{
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        dir_ = std::move(other.dir_);
        human_ = std::move(other.human_);
        generated_ = std::move(other.generated_);
        frozen_ = other.frozen_;
    }
    return *this;
}

ActionLibrary ActionLibrary::in_memory(bool load_initial_actions)
{
    ActionLibrary lib;
    lib.human_ = builtin_actions();
    if (load_initial_actions)
        for (auto& r : shipped_plugins())
            lib.human_.push_back(std::move(r));
    return lib;
}

ActionLibrary ActionLibrary::open(const fs::path& storage_dir, bool load_initial_actions,
                                  std::vector<std::string>* plugin_problems)
{
    std::error_code ec;
    for (const char* sub : {"actions", "plugins", "index"}) {
        fs::create_directories(storage_dir / sub, ec);
        if (ec)
            throw StorageError(fmt::format("cannot create {}: {}", (storage_dir / sub).string(), ec.message()));
    }

    ActionLibrary lib;
    lib.dir_ = storage_dir;
    lib.human_ = builtin_actions();

    std::vector<std::string> problems;
    if (load_initial_actions) {
        std::vector<ActionRecord> plugins;
        std::set<std::string> seen;
        for (const auto& r : lib.human_)
            seen.insert(r.name);
        for (const auto& p : json_files(storage_dir / "plugins")) {
            try {
                ActionRecord r = parse_record_file(p);
                r.origin = Origin::human;
                if (r.docstring.empty())
                    throw Error("missing docstring");
                if (!seen.insert(r.name).second)
                    throw Error(fmt::format("duplicate action name '{}'", r.name));
                plugins.push_back(std::move(r));
            } catch (const StorageError& e) {
                problems.push_back(fmt::format("{}: {}", p.string(), e.what()));
            } catch (const Error& e) {
                problems.push_back(fmt::format("{}: {}", p.string(), e.what()));
            }
        }
        std::stable_sort(plugins.begin(), plugins.end(), [](const ActionRecord& a, const ActionRecord& b) {
            int pa = catalog_position(a.name), pb = catalog_position(b.name);
            return pa != pb ? pa < pb : a.name < b.name;
        });
        for (auto& r : plugins)
            lib.human_.push_back(std::move(r));
    }

    std::set<std::string> human_names;
    for (const auto& r : lib.human_)
        human_names.insert(r.name);
    for (const auto& p : json_files(storage_dir / "actions")) {
        ActionRecord r;
        try {
            r = parse_record_file(p);
        } catch (const StorageError&) {
            throw;
        } catch (const Error& e) {
            throw StorageError(fmt::format("{}: {}", p.string(), e.what()));
        }
        r.origin = Origin::generated;
        // Human actions take precedence over a generated action of the same name.
        if (human_names.count(r.name))
            continue;
        lib.generated_.emplace(r.name, std::move(r));
    }

    auto manifest = storage_dir / "manifest.json";
    if (fs::exists(manifest, ec)) {
        Json j = Json::parse(read_file(manifest), nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw StorageError(fmt::format("{}: malformed manifest", manifest.string()));
        lib.frozen_ = j.value("frozen", false);
    } else {
        lib.write_manifest();
    }

    if (plugin_problems)
        *plugin_problems = std::move(problems);
    return lib;
}

void ActionLibrary::write_manifest() const
{
    if (!dir_)
        return;
    std::size_t plugins = json_files(*dir_ / "plugins").size();
    Json j{{"version", manifest_version},
           {"frozen", frozen_},
           {"counts", Json{{"generated", generated_.size()}, {"plugins", plugins}}}};
    write_file_atomic(*dir_ / "manifest.json", j.dump(2) + "\n");
}

std::vector<ActionRecord> ActionLibrary::generated_actions() const
{
    std::lock_guard lock(mutex_);
    std::vector<ActionRecord> out;
    for (const auto& [name, r] : generated_)
        out.push_back(r);
    return out;
}

std::optional<ActionRecord> ActionLibrary::find(const std::string& name) const
{
    std::lock_guard lock(mutex_);
    for (const auto& r : human_)
        if (r.name == name)
            return r;
    if (auto it = generated_.find(name); it != generated_.end())
        return it->second;
    return std::nullopt;
}

ActionNames ActionLibrary::snapshot_names() const
{
    std::lock_guard lock(mutex_);
    ActionNames names;
    for (const auto& r : human_)
        names.insert(r.name);
    for (const auto& [name, r] : generated_)
        names.insert(name);
    return names;
}

std::size_t ActionLibrary::generated_count() const
{
    std::lock_guard lock(mutex_);
    return generated_.size();
}

void ActionLibrary::persist_record(const ActionRecord& r) const
{
    if (!dir_)
        return;
    write_file_atomic(*dir_ / "actions" / (r.name + ".json"), encode_record_file(r));
}

AccumulateResult ActionLibrary::add_records(std::vector<ActionRecord> records)
{
    std::lock_guard lock(mutex_);
    if (frozen_)
        throw FrozenLibrary("the action library is frozen");
    AccumulateResult out;
    for (auto& r : records) {
        if (!is_identifier(r.name) || r.docstring.empty() || r.source.empty())
            continue;
        bool known = generated_.count(r.name) > 0 ||
                     std::any_of(human_.begin(), human_.end(), [&](const ActionRecord& h) { return h.name == r.name; });
        if (known)
            continue;
        r.origin = Origin::generated;
        r.embedding.reset();
        generated_.emplace(r.name, r);
        try {
            persist_record(r);
        } catch (const StorageError& e) {
            out.storage_errors.push_back(e.what());
        }
        out.accepted.push_back(std::move(r));
    }
    if (!out.accepted.empty()) {
        try {
            write_manifest();
        } catch (const StorageError& e) {
            out.storage_errors.push_back(e.what());
        }
    }
    return out;
}

AccumulateResult ActionLibrary::accumulate(const Step& step, const std::string& task_id)
{
    if (step.status != StepStatus::ok)
        throw Error(fmt::format("step {} did not execute successfully; nothing to accumulate", step.index));
    std::vector<ActionRecord> records;
    std::string now = utc_timestamp();
    for (const auto& f : step.defined_functions) {
        ActionRecord r = f;
        r.created_by_task = task_id;
        r.created_at = now;
        records.push_back(std::move(r));
    }
    return add_records(std::move(records));
}

AccumulateResult ActionLibrary::merge_from(const ActionLibrary& other)
{
    return add_records(other.generated_actions());
}

void ActionLibrary::freeze()
{
    std::lock_guard lock(mutex_);
    if (frozen_)
        return;
    frozen_ = true;
    write_manifest();
}

void ActionLibrary::thaw()
{
    std::lock_guard lock(mutex_);
    if (!frozen_)
        return;
    frozen_ = false;
    write_manifest();
}

bool ActionLibrary::frozen() const
{
    std::lock_guard lock(mutex_);
    return frozen_;
}

ActionLibrary ActionLibrary::clone_in_memory() const
{
    std::lock_guard lock(mutex_);
    ActionLibrary copy;
    copy.human_ = human_;
    copy.generated_ = generated_;
    copy.frozen_ = frozen_;
    return copy;
}

}  // namespace dynact
