#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "data.hpp"
#include "vocab.hpp"

using namespace selfsynth;

namespace {

std::string temp_file(const std::string& contents) {
    static int counter = 0;
    const std::string path =
        (std::filesystem::temp_directory_path() / ("tasks_" + std::to_string(counter++) + ".jsonl"))
            .string();
    std::ofstream out(path);
    out << contents;
    return path;
}

}  // namespace

TEST_CASE("load_jsonl parses well-formed records") {
    const std::string path = temp_file(
        R"({"id": "t1", "nl": "Tom has 3 apples .", "program": "n0=3\nanswer=n0"})"
        "\n"
        R"({"id": "t2", "template_id": "tmpl", "nl": "two plus two", "program": "answer=2+2"})"
        "\n\n");
    const auto tasks = load_jsonl(path);
    REQUIRE(tasks.size() == 2);
    CHECK(tasks[0].id == "t1");
    CHECK(tasks[0].template_id == "t1");  // defaults to id
    CHECK(tasks[0].nl == std::vector<std::string>{"tom", "has", "3", "apples", "."});
    CHECK(tasks[0].gold_result == 3.0);
    CHECK(tasks[1].template_id == "tmpl");
    CHECK(tasks[1].gold_result == 4.0);
    std::remove(path.c_str());
}

TEST_CASE("load_jsonl rejects malformed and failing records") {
    struct Case {
        const char* line;
        const char* why;
    };
    const Case malformed[] = {
        {"not json", "unparseable"},
        {R"(["id"])", "not an object"},
        {R"({"id": "a", "nl": "x"})", "missing program"},
        {R"({"nl": "x", "program": "answer=1"})", "missing id"},
        {R"({"id": "a", "nl": 3, "program": "answer=1"})", "nl not a string"},
        {R"({"id": "a", "nl": "x", "program": "answer="})", "syntax error in program"},
        {R"({"id": "a", "nl": "x", "program": "if x: pass"})", "unsupported construct"},
        {R"({"id": "a", "nl": "x", "program": "answer=1", "template_id": 7})",
         "template_id not a string"},
    };
    for (const Case& c : malformed) {
        CAPTURE(c.why);
        const std::string path = temp_file(std::string("{\"id\":\"ok\",\"nl\":\"x\",")
                                           + "\"program\":\"answer=1\"}\n" + c.line + "\n");
        CHECK_THROWS_WITH_AS(load_jsonl(path), doctest::Contains("line 2"), MalformedRecord);
        std::remove(path.c_str());
    }

    const std::string path =
        temp_file(R"({"id": "boom", "nl": "x", "program": "answer=1/0"})" "\n");
    CHECK_THROWS_WITH_AS(load_jsonl(path), doctest::Contains("boom"), GoldExecutionFailure);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_jsonl("/nonexistent/tasks.jsonl"), IoError);
}

TEST_CASE("save/load round-trip") {
    const auto tasks = synth_generate(5, 30, 6, 0);
    const std::string path = temp_file("");
    save_jsonl(path, tasks);
    const auto back = load_jsonl(path);
    REQUIRE(back.size() == tasks.size());
    for (size_t i = 0; i < tasks.size(); ++i) {
        CHECK(back[i].id == tasks[i].id);
        CHECK(back[i].template_id == tasks[i].template_id);
        CHECK(back[i].nl == tasks[i].nl);
        CHECK(canonical_key(back[i].gold) == canonical_key(tasks[i].gold));
        CHECK(back[i].gold_result == tasks[i].gold_result);
    }
    std::remove(path.c_str());
}

TEST_CASE("synth_generate: determinism, executability, round-robin") {
    const auto a = synth_generate(42, 100, 6, 10);
    const auto b = synth_generate(42, 100, 6, 10);
    REQUIRE(a.size() == 100);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].nl == b[i].nl);
        CHECK(pretty_print(a[i].gold) == pretty_print(b[i].gold));
        CHECK(a[i].gold_result == b[i].gold_result);
    }

    const auto c = synth_generate(43, 100, 6, 10);
    int differing = 0;
    for (size_t i = 0; i < c.size(); ++i) differing += c[i].nl != a[i].nl;
    CHECK(differing > 50);  // seed actually matters

    std::map<std::string, int> per_template;
    for (const Task& t : a) {
        ++per_template[t.template_id];
        CHECK(!t.gold.empty());
        CHECK(t.gold.statements.back().target == "answer");
        const ExecResult res = execute(t.gold);
        CHECK(res.ok());
        CHECK(res.answer == t.gold_result);
        CHECK(t.gold.size() <= 6);
    }
    CHECK(per_template.size() == 10);
    for (const auto& [id, n] : per_template) CHECK(n == 10);
}

TEST_CASE("synth_generate: max_lines filters the library") {
    for (const Task& t : synth_generate(7, 60, 4, 0)) {
        CHECK(t.gold.size() <= 4);
    }
    // 26-template library: the seven 6-line chains are excluded under max_lines=5
    CHECK(template_library_size() == 26);
    std::set<std::string> ids;
    for (const Task& t : synth_generate(7, 80, 5, 0)) ids.insert(t.template_id);
    CHECK(ids.size() == 19);

    CHECK_THROWS_AS(synth_generate(7, 10, 1, 0), InvalidArguments);
    CHECK_THROWS_AS(synth_generate(7, 10, 6, 27), InvalidArguments);
    CHECK_THROWS_AS(synth_generate(7, 10, 2, 10), InvalidArguments);  // only 3 fit
}

TEST_CASE("synth numerals appear verbatim in nl and program") {
    for (const Task& t : synth_generate(11, 50, 6, 0)) {
        const std::set<std::string> nl_tokens(t.nl.begin(), t.nl.end());
        for (const Statement& s : t.gold.statements) {
            for (const std::string& lex : statement_lexemes(s)) {
                if (!lex.empty() && (std::isdigit(static_cast<unsigned char>(lex[0])))) {
                    CAPTURE(lex);
                    // every program literal comes from the nl, except the halving
                    // templates' constant divisor 2
                    const bool halving = t.template_id == "box_half" ||
                                         t.template_id == "gets_half" ||
                                         t.template_id == "box_half_c";
                    if (!(halving && lex == "2")) CHECK(nl_tokens.count(lex) == 1);
                }
            }
        }
    }
}

TEST_CASE("corpus vocabulary stays small") {
    const auto tasks = synth_generate(3, 250, 6, 0);
    std::vector<std::string> material;
    for (const Task& t : tasks) {
        material.insert(material.end(), t.nl.begin(), t.nl.end());
        for (const Statement& s : t.gold.statements) {
            for (const auto& lex : statement_lexemes(s)) material.push_back(lex);
        }
    }
    const Vocabulary v = Vocabulary::build(material);
    CHECK(v.size() <= 120);
    CHECK(v.size() >= 40);
}

TEST_CASE("split_by_template partitions templates, not tasks") {
    const auto tasks = synth_generate(1, 250, 6, 25);
    const auto [train, dev] = split_by_template(tasks, 0.2, 99);
    CHECK(train.size() + dev.size() == tasks.size());
    CHECK(dev.size() == 50);  // 5 of 25 templates at 10 tasks each

    std::set<std::string> train_ids, dev_ids;
    for (const Task& t : train) train_ids.insert(t.template_id);
    for (const Task& t : dev) dev_ids.insert(t.template_id);
    CHECK(train_ids.size() == 20);
    CHECK(dev_ids.size() == 5);
    for (const auto& id : dev_ids) CHECK(train_ids.count(id) == 0);

    // deterministic in seed; different seeds give different partitions somewhere
    const auto [train2, dev2] = split_by_template(tasks, 0.2, 99);
    CHECK(dev2.size() == dev.size());
    for (size_t i = 0; i < dev.size(); ++i) CHECK(dev2[i].id == dev[i].id);
    bool any_diff = false;
    for (uint64_t s = 100; s < 110; ++s) {
        std::set<std::string> other;
        for (const Task& t : split_by_template(tasks, 0.2, s).second) other.insert(t.template_id);
        any_diff |= other != dev_ids;
    }
    CHECK(any_diff);

    CHECK_THROWS_AS(split_by_template(tasks, 0.0, 1), InvalidArguments);
    CHECK_THROWS_AS(split_by_template(tasks, 1.0, 1), InvalidArguments);
    const auto one = synth_generate(1, 10, 6, 1);
    CHECK_THROWS_AS(split_by_template(one, 0.5, 1), TooFewTemplates);

    // extreme fractions still leave both sides nonempty
    const auto lo = split_by_template(tasks, 0.01, 5);
    const auto hi = split_by_template(tasks, 0.99, 5);
    CHECK(!lo.second.empty());
    CHECK(!hi.first.empty());
}
