#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>

namespace oracle {

const std::vector<ScorerCase>& scorer_table()
{
    static const std::vector<ScorerCase> table = {
        {"1,234", "1234", true},
        {"Paris ", "paris", true},
        {"3.0", "3", true},
        {"$1,000", "1000", true},
        {"50%", "50", true},
        {"€12.50", "12.5", true},
        {"£7", "7.00", true},
        {"¥300", "300", true},
        {"42", "42.0001", false},
        {"", "42", false},
        {"42", "", false},
        {"   ", "x", false},
        {"NEW YORK", "new york", true},
        {"new-york", "new york", false},
        {"apple, banana", "Apple,Banana", true},
        {"1; 2; 3", "1;2;3", true},
        {"1, 2", "1, 2, 3", false},
        {"b, a", "a, b", false},
        {"1e3", "1000", true},
        {"0x10", "16", false},
        {"-5", "-5.0", true},
        {"five", "5", false},
        {"  Yes\n", "yes", true},
        {"3.14", "3.14159", false},
        {"red , GREEN ,blue", "red,green,blue", true},
        {"100", "100%", true},
        {"1.5, x", "1.50, X", true},
        {"Paris", "Paris, France", false},
        {"42 apples", "42", false},
        {"0.1", "1e-1", true},
    };
    return table;
}

const std::vector<CoverageFixture>& coverage_fixtures()
{
    static const std::vector<CoverageFixture> fixtures = {
        {"c01", 4, 1, true, 0.75, 0.75},
        {"c02", 4, 0, true, 1.0, 1.0},
        {"c03", 1, 1, true, 0.0, 0.0},
        {"c04", 2, 1, true, 0.5, 0.5},
        {"c05", 3, 1, true, 0.66666666666666667, 0.66666666666666667},
        {"c06", 3, 2, true, 0.33333333333333333, 0.33333333333333333},
        {"c07", 5, 0, true, 1.0, 1.0},
        {"c08", 5, 2, true, 0.6, 0.6},
        {"c09", 5, 5, true, 0.0, 0.0},
        {"c10", 8, 3, true, 0.625, 0.625},
        {"c11", 10, 1, true, 0.9, 0.9},
        {"c12", 20, 4, true, 0.8, 0.8},
        {"c13", 20, 0, true, 1.0, 1.0},
        {"c14", 6, 5, true, 0.16666666666666667, 0.16666666666666667},
        {"c15", 7, 3, true, 0.57142857142857143, 0.57142857142857143},
        {"c16", 4, 2, false, 0.5, 1.0},
        {"c17", 3, 3, false, 0.0, 1.0},
        {"c18", 1, 0, false, 1.0, 1.0},
        {"c19", 9, 2, false, 0.77777777777777778, 1.0},
        {"c20", 12, 5, true, 0.58333333333333333, 0.58333333333333333},
    };
    return fixtures;
}

dynact::Trajectory make_trajectory(const CoverageFixture& f, const dynact::ActionNames& start)
{
    dynact::Trajectory t;
    t.task_id = f.id;
    t.success = f.success;
    t.start_action_names = start;
    for (int i = 1; i <= f.steps; ++i) {
        dynact::Step s;
        s.index = i;
        s.code = "...";
        dynact::ActionRecord r;
        r.docstring = "d";
        r.source = "def x(): pass";
        if (i <= f.novel) {
            r.name = f.id + "_helper_" + std::to_string(i);
            s.defined_functions.push_back(r);
            s.is_novel = true;
        } else if (i % 2 == 0 && !start.empty()) {
            r.name = *start.begin();
            s.defined_functions.push_back(r);
        }
        t.steps.push_back(s);
    }
    return t;
}

// Decision points: if/elif, for, while, each except clause, conditional
// expressions, each extra boolean operand, each comprehension generator and
// each comprehension filter.
const std::vector<ComplexityCase>& complexity_corpus()
{
    static const std::vector<ComplexityCase> corpus = {
        {"straight_line", R"(def straight_line(a, b):
    """Add two numbers."""
    total = a + b
    return total
)",
         1},
        {"clamp_low", R"(def clamp_low(x, lo):
    """Raise x to at least lo."""
    if x < lo:
        return lo
    return x
)",
         2},
        // 1 + for + if
        {"count_crustacean_mentions", R"(def count_crustacean_mentions(slide_text: str) -> int:
    """Count slides mentioning crustaceans in the provided slide text."""
    crustaceans = ['crayfish', 'isopods', 'Yeti crab', 'Spider crab']
    count = 0
    for crustacean in crustaceans:
        if crustacean in slide_text:
            count += 1
    return count
)",
         3},
        // 1 + if + elif
        {"sign_label", R"(def sign_label(x):
    """Describe the sign of a number."""
    if x > 0:
        return "positive"
    elif x < 0:
        return "negative"
    else:
        return "zero"
)",
         3},
        // 1 + while + and + if
        {"scan_until", R"(def scan_until(items, stop):
    """Collect items until the stop value or a None."""
    out = []
    i = 0
    while i < len(items) and items[i] != stop:
        if items[i] is None:
            break
        out.append(items[i])
        i += 1
    return out
)",
         4},
        // 1 + two comprehension generators + one filter + conditional expression
        {"even_squares", R"(def even_squares(values, negate=False):
    """Square the even values, optionally negated."""
    squares = [v * v for v in values if v % 2 == 0]
    return [-s for s in squares] if negate else squares
)",
         5},
        // 1 + for + two excepts + if + conditional expression
        {"parse_numbers", R"(def parse_numbers(tokens):
    """Parse tokens as numbers, skipping bad ones."""
    out = []
    for t in tokens:
        try:
            v = float(t)
        except ValueError:
            continue
        except TypeError:
            continue
        if v != v:
            continue
        out.append(int(v) if v == int(v) else v)
    return out
)",
         6},
        // 1 + for + if + elif + while + except + conditional expression
        {"summarize_lines", R"(def summarize_lines(lines):
    """Count numeric, blank and other lines."""
    numeric = blank = other = 0
    for line in lines:
        text = line.strip()
        if not text:
            blank += 1
        elif text.isdigit():
            numeric += 1
        else:
            other += 1
    retries = 3
    while retries > 0:
        try:
            retries -= 1
        except RuntimeError:
            pass
    label = "mostly numeric" if numeric > other else "mixed"
    return numeric, blank, other, label
)",
         7},
        // 1 + for + if + or + and + while + except + comprehension generator
        {"pick_records", R"(def pick_records(records, wanted):
    """Select records that match a wanted key or are flagged."""
    picked = []
    for r in records:
        if r.get("flag") and r.get("ok") or r.get("key") in wanted:
            picked.append(r)
    n = len(picked)
    while n > 100:
        try:
            picked.pop()
        except IndexError:
            break
        n -= 1
    return [p["key"] for p in picked]
)",
         8},
        // 1 + for + for
        {"pair_sums", R"(def pair_sums(xs, ys):
    """All pairwise sums of two lists."""
    out = []
    for x in xs:
        for y in ys:
            out.append(x + y)
    return out
)",
         3},
    };
    return corpus;
}

namespace {

std::uint32_t fnv1a_32(const std::string& s)
{
    std::uint32_t h = 0x811C9DC5u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x01000193u;
    }
    return h;
}

std::int64_t dot(const Counts& a, const Counts& b)
{
    std::int64_t s = 0;
    for (const auto& [bin, n] : a)
        if (auto it = b.find(bin); it != b.end())
            s += n * it->second;
    return s;
}

}  // namespace

Counts trigram_counts(const std::string& text)
{
    std::string lower;
    for (unsigned char c : text)
        lower += static_cast<char>(std::tolower(c));
    Counts out;
    if (lower.size() < 3) {
        out[static_cast<int>(fnv1a_32(lower) % 256)] += 1;
        return out;
    }
    for (std::size_t i = 0; i + 3 <= lower.size(); ++i)
        out[static_cast<int>(fnv1a_32(lower.substr(i, 3)) % 256)] += 1;
    return out;
}

std::vector<Ranked> brute_force_rank(const std::map<std::string, std::string>& docstrings, const std::string& query,
                                     int k)
{
    struct Item {
        std::string name;
        std::int64_t dot;
        std::int64_t norm2;
    };
    Counts q = trigram_counts(query);
    std::int64_t qn = dot(q, q);
    std::vector<Item> items;
    for (const auto& [name, doc] : docstrings) {
        Counts c = trigram_counts(doc);
        items.push_back({name, dot(c, q), dot(c, c)});
    }
    // a.dot/sqrt(a.norm2) > b.dot/sqrt(b.norm2), decided on integers.
    auto greater = [](const Item& a, const Item& b) {
        bool sa = a.dot >= 0, sb = b.dot >= 0;
        if (sa != sb)
            return sa;
        __int128 lhs = static_cast<__int128>(a.dot) * a.dot * b.norm2;
        __int128 rhs = static_cast<__int128>(b.dot) * b.dot * a.norm2;
        return sa ? lhs > rhs : lhs < rhs;
    };
    std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
        if (greater(a, b))
            return true;
        if (greater(b, a))
            return false;
        return a.name < b.name;
    });
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < items.size() && static_cast<int>(i) < k; ++i)
        out.push_back({items[i].name, static_cast<double>(items[i].dot) /
                                          std::sqrt(static_cast<double>(items[i].norm2) * static_cast<double>(qn))});
    return out;
}

std::vector<RetrievalCase> random_retrieval_cases(int count, std::uint64_t seed)
{
    static const std::vector<std::string> words = {
        "read",  "write",  "file",   "csv",    "column", "sum",     "count",  "lines", "word",  "text",
        "parse", "number", "list",   "sort",   "filter", "download", "url",   "page",  "table", "row",
        "prime", "check",  "string", "upper",  "lower",  "reverse", "mean",   "value", "json",  "key",
        "pdf",   "extract", "image", "search", "web",    "date",    "format", "split", "join",  "merge",
    };
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto sentence = [&] {
        std::size_t len = 1 + pick(8);
        std::string s;
        for (std::size_t i = 0; i < len; ++i)
            s += (i ? " " : "") + words[pick(words.size())];
        return s;
    };
    std::vector<RetrievalCase> cases;
    for (int c = 0; c < count; ++c) {
        RetrievalCase rc;
        std::size_t size = 1 + pick(100);
        std::vector<std::string> docs;
        for (std::size_t i = 0; i < size; ++i) {
            // Roughly one in five docstrings repeats an earlier one to force ties.
            if (!docs.empty() && pick(5) == 0)
                docs.push_back(docs[pick(docs.size())]);
            else
                docs.push_back(sentence());
            char name[32];
            std::snprintf(name, sizeof name, "act_%03zu_%c", pick(1000), static_cast<char>('a' + pick(26)));
            rc.docstrings.emplace(name, docs.back());
        }
        rc.query = pick(4) == 0 && !docs.empty() ? docs[pick(docs.size())] : sentence();
        rc.k = 1 + static_cast<int>(pick(15));
        cases.push_back(std::move(rc));
    }
    return cases;
}

}  // namespace oracle
