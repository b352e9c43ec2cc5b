#pragma once

// R(q, k): docstring embeddings of generated actions, ranked by cosine
// similarity against an embedded query.

#include "dynact/core.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace dynact {

inline constexpr int deterministic_dimension = 256;

class Embedder {
public:
    virtual ~Embedder() = default;
    /// Unit-norm embedding of `text`. Throws ProviderError.
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::string kind() const = 0;
};

/// Lowercased byte trigrams hashed (FNV-1a) into 256 count bins, then
/// L2-normalized. Texts shorter than three bytes form a single gram.
class DeterministicEmbedder final : public Embedder {
public:
    std::vector<double> embed(const std::string& text) override;
    std::string kind() const override { return "deterministic_test"; }
};

/// OpenAI-compatible embedding endpoint: POST {model, input:[text]}, vector
/// read from data[0].embedding. The API key is read from `api_key_env`.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string endpoint, std::string model, std::string api_key_env = "DYNACT_EMBEDDING_API_KEY");
    std::vector<double> embed(const std::string& text) override;
    std::string kind() const override { return "remote"; }

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_env_;
};

std::vector<double> embed_deterministic(std::string_view text);

/// Scales `v` to unit L2 norm; the zero vector is returned unchanged.
std::vector<double> l2_normalize(std::vector<double> v);

/// Dot product; equals cosine similarity for unit vectors.
double dot(const std::vector<double>& a, const std::vector<double>& b);

struct ScoredName {
    std::string name;
    double score = 0.0;

    bool operator==(const ScoredName&) const = default;
};

using EmbeddingEntries = std::map<std::string, std::vector<double>>;

/// Top-`k` entries by descending similarity to `query`, ties by ascending name.
std::vector<ScoredName> rank(const EmbeddingEntries& entries, const std::vector<double>& query, int k);

class EmbeddingIndex {
public:
    /// `file` is the embeddings.jsonl path; std::nullopt keeps the index in memory.
    EmbeddingIndex(std::shared_ptr<Embedder> embedder, std::optional<std::filesystem::path> file);

    /// Reads the index file if present. Throws StorageError.
    void load();

    /// Embeds the docstring and stores it under the record name, retrying any
    /// previously failed records first. Throws ProviderError (the record is
    /// queued for retry) or StorageError.
    void index_action(const ActionRecord& record);

    std::vector<ScoredName> retrieve(const std::string& query, int k) const;

    std::size_t size() const;
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;
    std::vector<std::string> pending() const;
    int dimension() const;
    std::shared_ptr<const EmbeddingEntries> snapshot() const;

    /// Copy without a backing file, for per-task overlays.
    std::unique_ptr<EmbeddingIndex> clone_in_memory() const;

    Embedder& embedder() const { return *embedder_; }

private:
    void persist(const EmbeddingEntries& entries) const;

    std::shared_ptr<Embedder> embedder_;
    std::optional<std::filesystem::path> file_;
    mutable std::mutex mutex_;
    std::shared_ptr<const EmbeddingEntries> entries_;
    std::map<std::string, std::string> pending_;  // name -> docstring awaiting retry
};

/// One JSON line {name, dim, vector} with 17 significant digits per float.
std::string encode_embedding_line(const std::string& name, const std::vector<double>& vector);

}  // namespace dynact
