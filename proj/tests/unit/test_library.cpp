#include "dynact/library.hpp"
#include "dynact/serialize.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dynact;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

ActionRecord fn(const std::string& name, const std::string& doc)
{
    ActionRecord r;
    r.name = name;
    r.docstring = doc;
    r.source = "def " + name + "(file_path):\n    \"\"\"" + doc + "\"\"\"\n    return file_path";
    r.complexity = 1;
    return r;
}

Step ok_step(std::vector<ActionRecord> fns)
{
    Step s;
    s.code = "...";
    s.status = StepStatus::ok;
    s.defined_functions = std::move(fns);
    return s;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> names(const std::vector<ActionRecord>& rs)
{
    std::vector<std::string> out;
    for (const auto& r : rs)
        out.push_back(r.name);
    return out;
}

}  // namespace

TEST_SUITE("library")
{
    TEST_CASE("initial actions")
    {
        TempDir dir("dynact_lib_initial");
        auto lib = ActionLibrary::open(dir.path, true);
        CHECK(names(lib.human_actions()) == std::vector<std::string>{"submit_final_answer", "get_relevant_actions"});
        CHECK(lib.snapshot_names() == ActionNames{"submit_final_answer", "get_relevant_actions"});
        CHECK(lib.human_actions()[0].docstring == "Submits the final answer to the given problem.");
        CHECK(lib.human_actions()[0].origin == Origin::human);

        install_shipped_plugins(dir.path);
        auto with_plugins = ActionLibrary::open(dir.path, true);
        CHECK(names(with_plugins.human_actions()) ==
              std::vector<std::string>{"submit_final_answer", "get_relevant_actions", "download_file",
                                       "inspect_file_as_text"});
        CHECK(with_plugins.find("download_file")->docstring.rfind("Download a file at a given URL.", 0) == 0);

        auto without = ActionLibrary::open(dir.path, false);
        CHECK(without.snapshot_names() == ActionNames{"submit_final_answer", "get_relevant_actions"});
    }

    TEST_CASE("the catalog lists thirteen initial actions in order")
    {
        const auto& cat = initial_action_catalog();
        REQUIRE(cat.size() == 13);
        CHECK(cat[0].name == "submit_final_answer");
        CHECK(cat[1].name == "get_relevant_actions");
        int shipped = 0;
        for (const auto& p : cat)
            shipped += p.shipped;
        CHECK(shipped == 4);
    }

    TEST_CASE("malformed plugins are reported and skipped")
    {
        TempDir dir("dynact_lib_badplugin");
        install_shipped_plugins(dir.path);
        {
            std::ofstream out(dir.path / "plugins" / "broken.json");
            out << "{ not json";
        }
        std::vector<std::string> problems;
        auto lib = ActionLibrary::open(dir.path, true, &problems);
        CHECK(problems.size() == 1);
        CHECK(lib.human_actions().size() == 4);
    }

    TEST_CASE("accumulation accepts new documented functions only")
    {
        auto lib = ActionLibrary::in_memory();
        auto first = lib.accumulate(ok_step({fn("extract_text_from_pdf", "Extract text from a PDF file.")}), "t1");
        REQUIRE(first.accepted.size() == 1);
        CHECK(first.accepted[0].origin == Origin::generated);
        CHECK(first.accepted[0].created_by_task == std::optional<std::string>("t1"));
        CHECK_FALSE(first.accepted[0].created_at.empty());

        auto dup = lib.accumulate(ok_step({fn("extract_text_from_pdf", "Another docstring.")}), "t2");
        CHECK(dup.accepted.empty());
        CHECK(lib.find("extract_text_from_pdf")->docstring == "Extract text from a PDF file.");

        auto shadow = lib.accumulate(ok_step({fn("submit_final_answer", "Mine.")}), "t3");
        CHECK(shadow.accepted.empty());
        auto undocumented = lib.accumulate(ok_step({fn("quiet", "")}), "t3");
        CHECK(undocumented.accepted.empty());

        Step failed = ok_step({fn("g", "G.")});
        failed.status = StepStatus::exec_error;
        CHECK_THROWS_AS(lib.accumulate(failed, "t4"), Error);
        CHECK(lib.generated_count() == 1);
    }

    TEST_CASE("snapshots grow monotonically and freeze holds them")
    {
        auto lib = ActionLibrary::in_memory();
        auto before = lib.snapshot_names();
        lib.accumulate(ok_step({fn("foo", "Foo.")}), "t");
        auto after = lib.snapshot_names();
        before.insert("foo");
        CHECK(after == before);

        lib.freeze();
        CHECK(lib.frozen());
        CHECK(lib.snapshot_names() == lib.snapshot_names());
        CHECK_THROWS_AS(lib.accumulate(ok_step({fn("bar", "Bar.")}), "t"), FrozenLibrary);
        lib.thaw();
        CHECK(lib.accumulate(ok_step({fn("bar", "Bar.")}), "t").accepted.size() == 1);
    }

    TEST_CASE("records and manifest persist")
    {
        TempDir dir("dynact_lib_persist");
        {
            auto lib = ActionLibrary::open(dir.path, true);
            lib.accumulate(ok_step({fn("zeta", "Zeta."), fn("alpha", "Alpha.")}), "t9");
            lib.freeze();
        }
        auto text = slurp(dir.path / "actions" / "alpha.json");
        auto j = Json::parse(text);
        CHECK(j["name"] == "alpha");
        CHECK(j["origin"] == "generated");
        CHECK(j["created_by_task"] == "t9");
        CHECK(text.find("\"complexity\"") < text.find("\"created_at\""));  // sorted keys
        CHECK(text.find("\"name\"") < text.find("\"origin\""));

        auto manifest = Json::parse(slurp(dir.path / "manifest.json"));
        CHECK(manifest["version"] == 1);
        CHECK(manifest["frozen"] == true);
        CHECK(manifest["counts"]["generated"] == 2);

        auto reopened = ActionLibrary::open(dir.path, true);
        CHECK(reopened.frozen());
        CHECK(names(reopened.generated_actions()) == std::vector<std::string>{"alpha", "zeta"});
    }

    TEST_CASE("in-memory clones merge back first-wins")
    {
        auto base = ActionLibrary::in_memory();
        auto a = base.clone_in_memory();
        auto b = base.clone_in_memory();
        a.accumulate(ok_step({fn("shared", "From a.")}), "ta");
        b.accumulate(ok_step({fn("shared", "From b."), fn("only_b", "B.")}), "tb");
        base.merge_from(a);
        auto merged = base.merge_from(b);
        CHECK(names(merged.accepted) == std::vector<std::string>{"only_b"});
        CHECK(base.find("shared")->docstring == "From a.");
        CHECK(base.generated_count() == 2);
    }

    TEST_CASE("built-in sources describe themselves")
    {
        for (const auto& r : builtin_actions()) {
            CHECK(r.origin == Origin::human);
            CHECK(r.created_at == "1970-01-01T00:00:00Z");
            CHECK(r.source.find("def " + r.name + "(") != std::string::npos);
        }
    }
}
