#include "dynact/retrieval.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace dynact;
namespace fs = std::filesystem;

namespace {

ActionRecord generated(const std::string& name, const std::string& doc)
{
    ActionRecord r;
    r.name = name;
    r.docstring = doc;
    r.source = "def " + name + "():\n    \"\"\"" + doc + "\"\"\"\n    pass";
    r.origin = Origin::generated;
    return r;
}

std::set<std::string> raw_trigrams(const std::string& s)
{
    std::set<std::string> out;
    for (std::size_t i = 0; i + 3 <= s.size(); ++i)
        out.insert(s.substr(i, 3));
    return out;
}

class FlakyEmbedder : public Embedder {
public:
    bool fail = true;
    std::vector<double> embed(const std::string& text) override
    {
        if (fail)
            throw ProviderError("embedding service unavailable", 503);
        return embed_deterministic(text);
    }
    std::string kind() const override { return "flaky"; }
};

}  // namespace

TEST_SUITE("retrieval")
{
    TEST_CASE("a three-letter text hits exactly one bin")
    {
        auto v = embed_deterministic("abc");
        REQUIRE(v.size() == 256);
        int nonzero = 0;
        for (double x : v)
            nonzero += x != 0.0;
        CHECK(nonzero == 1);
        CHECK(dot(v, v) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(embed_deterministic("ABC") == v);
        CHECK(embed_deterministic("abc") == v);
    }

    TEST_CASE("embedding bins follow FNV-1a over lowercase trigrams")
    {
        for (std::string text : {"Sort a list", "x", "hello world", "Download Webpage"}) {
            auto counts = oracle::trigram_counts(text);
            double norm = 0;
            for (const auto& [bin, n] : counts)
                norm += static_cast<double>(n * n);
            norm = std::sqrt(norm);
            auto v = embed_deterministic(text);
            for (int i = 0; i < 256; ++i) {
                auto it = counts.find(i);
                double want = it == counts.end() ? 0.0 : static_cast<double>(it->second) / norm;
                CHECK(v[static_cast<std::size_t>(i)] == doctest::Approx(want).epsilon(1e-15));
            }
        }
    }

    TEST_CASE("trigram overlap orders similar phrases first")
    {
        // "sort a list" shares all nine of its trigrams with "sort a list of
        // items" and none with "download webpage".
        auto a = raw_trigrams("sort a list");
        auto b = raw_trigrams("sort a list of items");
        auto c = raw_trigrams("download webpage");
        int ab = 0, ac = 0;
        for (const auto& t : a) {
            ab += b.count(t) > 0;
            ac += c.count(t) > 0;
        }
        REQUIRE(a.size() == 9);
        REQUIRE(ab == 9);
        REQUIRE(ac == 0);
        double near = dot(embed_deterministic("sort a list"), embed_deterministic("sort a list of items"));
        double far = dot(embed_deterministic("sort a list"), embed_deterministic("download webpage"));
        CHECK(near > far);
        CHECK(near > 0.5);
    }

    TEST_CASE("ranking breaks ties by name")
    {
        EmbeddingEntries e;
        e["zeta"] = embed_deterministic("parse a date");
        e["alpha"] = embed_deterministic("parse a date");
        e["mid"] = embed_deterministic("download a file");
        auto r = rank(e, embed_deterministic("parse a date"), 10);
        REQUIRE(r.size() == 3);
        CHECK(r[0].name == "alpha");
        CHECK(r[1].name == "zeta");
        CHECK(r[0].score == r[1].score);
        CHECK_THROWS_AS(rank(e, embed_deterministic("q"), 0), Error);
    }

    TEST_CASE("index retrieval examples")
    {
        EmbeddingIndex index(std::make_shared<DeterministicEmbedder>(), std::nullopt);
        CHECK(index.retrieve("anything", 10).empty());
        index.index_action(generated("read_csv", "Read a CSV file into rows."));
        index.index_action(generated("sum_values", "Add up a list of numbers."));
        index.index_action(generated("fetch_page", "Download a web page as text."));
        CHECK(index.size() == 3);
        auto top = index.retrieve("Add up a list of numbers.", 1);
        REQUIRE(top.size() == 1);
        CHECK(top[0].name == "sum_values");
        CHECK(std::abs(top[0].score - 1.0) < 1e-9);
        CHECK(index.retrieve("numbers", 10).size() == 3);
    }

    TEST_CASE("indexing is idempotent by name and refuses human actions")
    {
        EmbeddingIndex index(std::make_shared<DeterministicEmbedder>(), std::nullopt);
        index.index_action(generated("f", "First description."));
        index.index_action(generated("f", "Second description."));
        CHECK(index.size() == 1);
        CHECK(index.snapshot()->at("f") == embed_deterministic("Second description."));
        auto human = generated("h", "Human tool.");
        human.origin = Origin::human;
        CHECK_THROWS_AS(index.index_action(human), Error);
        CHECK_THROWS_AS(index.index_action(generated("g", "")), Error);
    }

    TEST_CASE("the index persists and reloads")
    {
        auto dir = fs::temp_directory_path() / "dynact_index_test";
        fs::remove_all(dir);
        auto file = dir / "index" / "embeddings.jsonl";
        {
            EmbeddingIndex index(std::make_shared<DeterministicEmbedder>(), file);
            index.load();
            index.index_action(generated("b_fn", "Beta."));
            index.index_action(generated("a_fn", "Alpha."));
        }
        std::ifstream in(file);
        std::string first, second;
        std::getline(in, first);
        std::getline(in, second);
        CHECK(first.rfind("{\"name\":\"a_fn\",\"dim\":256,", 0) == 0);
        CHECK(second.rfind("{\"name\":\"b_fn\"", 0) == 0);

        EmbeddingIndex reloaded(std::make_shared<DeterministicEmbedder>(), file);
        reloaded.load();
        CHECK(reloaded.size() == 2);
        CHECK(reloaded.snapshot()->at("a_fn") == embed_deterministic("Alpha."));
        fs::remove_all(dir);
    }

    TEST_CASE("embedding failures are queued and retried")
    {
        auto flaky = std::make_shared<FlakyEmbedder>();
        EmbeddingIndex index(flaky, std::nullopt);
        CHECK_THROWS_AS(index.index_action(generated("late", "Arrives later.")), ProviderError);
        CHECK(index.size() == 0);
        REQUIRE(index.pending().size() == 1);
        flaky->fail = false;
        index.index_action(generated("next", "Next one."));
        CHECK(index.size() == 2);
        CHECK(index.pending().empty());
    }

    TEST_CASE("retrieval agrees with the exhaustive oracle on randomized indices")
    {
        auto cases = oracle::random_retrieval_cases(200, 20240601);
        int agree = 0;
        for (const auto& rc : cases) {
            EmbeddingIndex index(std::make_shared<DeterministicEmbedder>(), std::nullopt);
            for (const auto& [name, doc] : rc.docstrings)
                index.index_action(generated(name, doc));
            auto got = index.retrieve(rc.query, rc.k);
            auto want = oracle::brute_force_rank(rc.docstrings, rc.query, rc.k);
            bool same = got.size() == want.size();
            for (std::size_t i = 0; same && i < got.size(); ++i)
                same = got[i].name == want[i].name && std::abs(got[i].score - want[i].score) < 1e-9;
            agree += same;
        }
        CHECK(agree == 200);
    }
}
