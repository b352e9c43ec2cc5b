#pragma once

// The action library: human-designed actions (A^u, always in the prompt) and
// generated actions (A^g, accumulated from successful steps and persisted
// one JSON file per action).
//
// Layout under the storage directory:
//   actions/<name>.json      generated actions
//   plugins/<name>.json      human plugin tools (same schema, origin=human)
//   index/embeddings.jsonl   retrieval index (owned by EmbeddingIndex)
//   manifest.json            {version, frozen, counts}

#include "dynact/core.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace dynact {

class FrozenLibrary : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class PluginError : public Error {
public:
    PluginError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct PluginInfo {
    std::string name;
    std::string description;
    bool shipped = false;  // a working implementation is bundled
};

/// The 13 initial tools in their canonical order; only the first two are
/// framework primitives.
const std::vector<PluginInfo>& initial_action_catalog();

/// Records for the framework primitives submit_final_answer and
/// get_relevant_actions.
std::vector<ActionRecord> builtin_actions();

/// Records for the bundled plugin tools (download_file, inspect_file_as_text).
std::vector<ActionRecord> shipped_plugins();

struct AccumulateResult {
    std::vector<ActionRecord> accepted;
    std::vector<std::string> storage_errors;  // records stay in memory regardless
};

class ActionLibrary {
public:
    /// Opens (creating directories as needed) a library. With
    /// `load_initial_actions` false only the framework primitives are human
    /// actions. Malformed plugin files are skipped and listed in
    /// `plugin_problems`. Throws StorageError.
    static ActionLibrary open(const std::filesystem::path& storage_dir, bool load_initial_actions,
                              std::vector<std::string>* plugin_problems = nullptr);

    /// A library with no backing directory.
    static ActionLibrary in_memory(bool load_initial_actions = true);

    ActionLibrary(ActionLibrary&& other) noexcept;
    ActionLibrary& operator=(ActionLibrary&& other) noexcept;

    const std::vector<ActionRecord>& human_actions() const { return human_; }

    /// Generated actions sorted by name.
    std::vector<ActionRecord> generated_actions() const;

    std::optional<ActionRecord> find(const std::string& name) const;

    /// Union of human and generated names at call time.
    ActionNames snapshot_names() const;

    std::size_t generated_count() const;

    /// Adds every documented, not-yet-known top-level function of an ok step.
    /// Throws FrozenLibrary, or Error if the step did not execute successfully.
    AccumulateResult accumulate(const Step& step, const std::string& task_id);

    /// Name-keyed union, first-wins; used to merge per-task copies.
    AccumulateResult merge_from(const ActionLibrary& other);

    /// Persists the manifest only when the frozen flag actually changes.
    void freeze();
    void thaw();
    bool frozen() const;

    /// Copy without a backing directory; mutations stay in memory.
    ActionLibrary clone_in_memory() const;

    const std::optional<std::filesystem::path>& storage_dir() const { return dir_; }

    /// Rewrites manifest.json. Throws StorageError.
    void write_manifest() const;

private:
    ActionLibrary() = default;
    void persist_record(const ActionRecord& r) const;
    AccumulateResult add_records(std::vector<ActionRecord> records);

    std::optional<std::filesystem::path> dir_;
    std::vector<ActionRecord> human_;
    std::map<std::string, ActionRecord> generated_;
    bool frozen_ = false;
    mutable std::mutex mutex_;
};

/// Writes the shipped plugins into `storage_dir/plugins`.
void install_shipped_plugins(const std::filesystem::path& storage_dir);

/// Canonical on-disk JSON for one record (sorted keys, trailing newline).
std::string encode_record_file(const ActionRecord& r);

}  // namespace dynact
