#include "dynact/retrieval.hpp"
#include "dynact/http.hpp"
#include "dynact/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

namespace dynact {

namespace {

std::uint32_t fnv1a(std::string_view bytes)
{
    std::uint32_t h = 2166136261u;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

// Scores are compared after rounding to 12 decimals so that mathematically
// equal similarities computed along different float paths still tie.
double quantize(double score)
{
    return std::round(score * 1e12) / 1e12;
}

}  // namespace

std::vector<double> l2_normalize(std::vector<double> v)
{
    double sq = 0.0;
    for (double x : v)
        sq += x * x;
    if (sq == 0.0)
        return v;
    double norm = std::sqrt(sq);
    for (double& x : v)
        x /= norm;
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size())
        throw Error(fmt::format("dimension mismatch: {} vs {}", a.size(), b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

std::vector<double> embed_deterministic(std::string_view text)
{
    std::string lower(text);
    for (auto& c : lower)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::vector<double> v(deterministic_dimension, 0.0);
    if (lower.size() < 3) {
        v[fnv1a(lower) % deterministic_dimension] += 1.0;
    } else {
        for (std::size_t i = 0; i + 3 <= lower.size(); ++i)
            v[fnv1a(std::string_view(lower).substr(i, 3)) % deterministic_dimension] += 1.0;
    }
    return l2_normalize(std::move(v));
}

std::vector<double> DeterministicEmbedder::embed(const std::string& text)
{
    return embed_deterministic(text);
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::string model, std::string api_key_env)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_env_(std::move(api_key_env))
{
}

std::vector<double> RemoteEmbedder::embed(const std::string& text)
{
    Json body{{"model", model_}, {"input", Json::array({text})}};
    std::map<std::string, std::string> headers;
    if (const char* key = std::getenv(api_key_env_.c_str()); key && *key)
        headers["Authorization"] = fmt::format("Bearer {}", key);
    HttpResponse res;
    try {
        res = http_post(endpoint_, body.dump(), "application/json", headers);
    } catch (const HttpError& e) {
        throw ProviderError(e.what());
    }
    if (res.status < 200 || res.status >= 300)
        throw ProviderError(fmt::format("embedding endpoint returned HTTP {}: {}", res.status, res.body.substr(0, 500)),
                            res.status);
    Json j = Json::parse(res.body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() || j["data"].empty())
        throw ProviderError(fmt::format("unexpected embedding response: {}", res.body.substr(0, 500)), res.status);
    auto v = j["data"][0].value("embedding", std::vector<double>{});
    if (v.empty())
        throw ProviderError("embedding response carried an empty vector", res.status);
    return l2_normalize(std::move(v));
}

std::vector<ScoredName> rank(const EmbeddingEntries& entries, const std::vector<double>& query, int k)
{
    if (k < 1)
        throw Error("k must be at least 1");
    std::vector<ScoredName> all;
    all.reserve(entries.size());
    for (const auto& [name, vec] : entries)
        all.push_back(ScoredName{name, quantize(dot(vec, query))});
    auto cmp = [](const ScoredName& a, const ScoredName& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.name < b.name;
    };
    std::size_t n = std::min(all.size(), static_cast<std::size_t>(k));
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), cmp);
    all.resize(n);
    return all;
}

std::string encode_embedding_line(const std::string& name, const std::vector<double>& vector)
{
    std::string out = fmt::format("{{\"name\":{},\"dim\":{},\"vector\":[", Json(name).dump(), vector.size());
    for (std::size_t i = 0; i < vector.size(); ++i) {
        if (i)
            out += ',';
        out += fmt::format("{:.17g}", vector[i]);
    }
    out += "]}\n";
    return out;
}

EmbeddingIndex::EmbeddingIndex(std::shared_ptr<Embedder> embedder, std::optional<std::filesystem::path> file)
    : embedder_(std::move(embedder)), file_(std::move(file)), entries_(std::make_shared<EmbeddingEntries>())
{
}

void EmbeddingIndex::load()
{
    if (!file_)
        return;
    auto entries = std::make_shared<EmbeddingEntries>();
    std::error_code ec;
    if (std::filesystem::exists(*file_, ec)) {
        std::ifstream in(*file_);
        if (!in)
            throw StorageError(fmt::format("cannot read {}", file_->string()));
        std::string line;
        int lineno = 0;
        std::optional<std::size_t> dim;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty())
                continue;
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                throw StorageError(fmt::format("{}:{}: malformed index line", file_->string(), lineno));
            auto name = j.value("name", std::string{});
            auto vec = j.value("vector", std::vector<double>{});
            if (name.empty() || vec.empty() || j.value("dim", std::size_t{0}) != vec.size())
                throw StorageError(fmt::format("{}:{}: malformed index entry", file_->string(), lineno));
            if (dim && *dim != vec.size())
                throw StorageError(fmt::format("{}:{}: dimension {} differs from {}", file_->string(), lineno,
                                               vec.size(), *dim));
            dim = vec.size();
            (*entries)[name] = std::move(vec);
        }
    }
    std::lock_guard lock(mutex_);
    entries_ = std::move(entries);
}

void EmbeddingIndex::persist(const EmbeddingEntries& entries) const
{
    if (!file_)
        return;
    std::error_code ec;
    std::filesystem::create_directories(file_->parent_path(), ec);
    auto tmp = *file_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw StorageError(fmt::format("cannot write {}", tmp.string()));
        for (const auto& [name, vec] : entries)
            out << encode_embedding_line(name, vec);
        if (!out.flush())
            throw StorageError(fmt::format("cannot write {}", tmp.string()));
    }
    std::filesystem::rename(tmp, *file_, ec);
    if (ec)
        throw StorageError(fmt::format("cannot replace {}: {}", file_->string(), ec.message()));
}

void EmbeddingIndex::index_action(const ActionRecord& record)
{
    if (record.origin != Origin::generated)
        throw Error(fmt::format("human action {} is never indexed", record.name));
    if (record.docstring.empty())
        throw Error(fmt::format("action {} has no docstring to index", record.name));

    std::lock_guard lock(mutex_);
    pending_[record.name] = record.docstring;
    auto next = std::make_shared<EmbeddingEntries>(*entries_);
    std::optional<ProviderError> failure;
    for (auto it = pending_.begin(); it != pending_.end();) {
        try {
            (*next)[it->first] = embedder_->embed(it->second);
            it = pending_.erase(it);
        } catch (const ProviderError& e) {
            if (!failure)
                failure = e;
            ++it;
        }
    }
    if (next->size() != entries_->size() || !failure) {
        persist(*next);
        entries_ = std::move(next);
    }
    if (failure)
        throw *failure;
}

std::vector<ScoredName> EmbeddingIndex::retrieve(const std::string& query, int k) const
{
    auto entries = snapshot();
    if (entries->empty()) {
        if (k < 1)
            throw Error("k must be at least 1");
        return {};
    }
    return rank(*entries, embedder_->embed(query), k);
}

std::shared_ptr<const EmbeddingEntries> EmbeddingIndex::snapshot() const
{
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t EmbeddingIndex::size() const
{
    return snapshot()->size();
}

bool EmbeddingIndex::contains(const std::string& name) const
{
    return snapshot()->count(name) > 0;
}

std::vector<std::string> EmbeddingIndex::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, vec] : *snapshot())
        out.push_back(name);
    return out;
}

std::vector<std::string> EmbeddingIndex::pending() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, doc] : pending_)
        out.push_back(name);
    return out;
}

int EmbeddingIndex::dimension() const
{
    auto entries = snapshot();
    return entries->empty() ? 0 : static_cast<int>(entries->begin()->second.size());
}

std::unique_ptr<EmbeddingIndex> EmbeddingIndex::clone_in_memory() const
{
    auto copy = std::make_unique<EmbeddingIndex>(embedder_, std::nullopt);
    std::lock_guard lock(mutex_);
    copy->entries_ = entries_;
    copy->pending_ = pending_;
    return copy;
}

}  // namespace dynact
