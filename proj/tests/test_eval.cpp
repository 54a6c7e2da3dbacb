#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "eval.hpp"
#include "rng.hpp"

using namespace selfsynth;

namespace {

// Exhaustive subset enumeration: positions 0..c-1 are the correct samples;
// count k-subsets of {0..n-1} hitting at least one of them.
double pass_at_k_by_enumeration(int n, int c, int k) {
    int total = 0, hit = 0;
    for (uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != k) continue;
        ++total;
        hit += (mask & ((1u << c) - 1)) != 0;
    }
    return static_cast<double>(hit) / total;
}

std::vector<Task> toy_tasks() {
    std::vector<Task> tasks;
    const char* specs[] = {"tom has 3 apples . tom gets 5 more . how many now ?",
                           "ann has 6 cards . ann gives 2 away . how many now ?"};
    const char* golds[] = {"n0=3\nn1=5\nt0=n0+n1\nanswer=t0", "n0=6\nn1=2\nt0=n0-n1\nanswer=t0"};
    for (int i = 0; i < 2; ++i) {
        Task t;
        t.id = "t" + std::to_string(i);
        t.template_id = t.id;
        t.nl = split_words(specs[i]);
        t.gold = parse(golds[i]);
        t.gold_result = execute(t.gold).answer;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

Vocabulary toy_vocab(const std::vector<Task>& tasks) {
    std::vector<std::string> material;
    for (const Task& t : tasks) {
        material.insert(material.end(), t.nl.begin(), t.nl.end());
        for (const Statement& s : t.gold.statements) {
            for (const auto& lex : statement_lexemes(s)) material.push_back(lex);
        }
    }
    return Vocabulary::build(material);
}

}  // namespace

TEST_CASE("pass_at_k matches exhaustive enumeration for all n <= 12") {
    for (int n = 1; n <= 12; ++n) {
        for (int c = 0; c <= n; ++c) {
            for (int k = 1; k <= n; ++k) {
                CAPTURE(n);
                CAPTURE(c);
                CAPTURE(k);
                REQUIRE(pass_at_k(n, c, k) ==
                        doctest::Approx(pass_at_k_by_enumeration(n, c, k)).epsilon(1e-12));
            }
        }
    }
    CHECK(pass_at_k(5, 2, 2) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("pass_at_k boundaries and validation") {
    CHECK(pass_at_k(10, 0, 5) == 0.0);
    CHECK(pass_at_k(10, 10, 1) == 1.0);
    CHECK(pass_at_k(10, 7, 4) == 1.0);  // n-c=3 < k
    CHECK(pass_at_k(1, 1, 1) == 1.0);
    CHECK(pass_at_k(1, 0, 1) == 0.0);
    CHECK_THROWS_AS(pass_at_k(5, 2, 0), InvalidArguments);
    CHECK_THROWS_AS(pass_at_k(5, 2, 6), InvalidArguments);
    CHECK_THROWS_AS(pass_at_k(5, -1, 2), InvalidArguments);
    CHECK_THROWS_AS(pass_at_k(5, 6, 2), InvalidArguments);
    CHECK_THROWS_AS(pass_at_k(0, 0, 1), InvalidArguments);
}

TEST_CASE("pass_at_k is monotone in c and k") {
    const int n = 12;
    for (int k = 1; k <= n; ++k) {
        for (int c = 1; c <= n; ++c) {
            CHECK(pass_at_k(n, c, k) >= pass_at_k(n, c - 1, k));
        }
    }
    for (int c = 0; c <= n; ++c) {
        for (int k = 2; k <= n; ++k) {
            CHECK(pass_at_k(n, c, k) >= pass_at_k(n, c, k - 1));
        }
    }
}

TEST_CASE("pass_at_k agrees with Monte-Carlo subset draws") {
    const int n = 10, c = 4, k = 3;
    Rng rng(7);
    const int trials = 100000;
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        // draw a k-subset by partial Fisher-Yates over indices 0..n-1
        int idx[n];
        for (int i = 0; i < n; ++i) idx[i] = i;
        bool hit = false;
        for (int j = 0; j < k; ++j) {
            const int pick = j + static_cast<int>(rng.below(n - j));
            std::swap(idx[j], idx[pick]);
            hit |= idx[j] < c;
        }
        hits += hit;
    }
    const double mc = static_cast<double>(hits) / trials;
    CHECK(std::abs(mc - pass_at_k(n, c, k)) < 0.01);
}

TEST_CASE("unique_ratio counts canonical keys") {
    CHECK(unique_ratio({"a=1", "a=1", "a=1", "a=1"}) == doctest::Approx(0.25));
    CHECK(unique_ratio({"a=1", "a=2", "a=3"}) == doctest::Approx(1.0));
    // consistent renamings and reformatting collapse
    CHECK(unique_ratio({"a=1\nb=a+2", "x =1\ny= x + 2"}) == doctest::Approx(0.5));
    // unparseable texts count as distinct raw strings
    CHECK(unique_ratio({"garbage one", "garbage two", "garbage one"}) == doctest::Approx(2.0 / 3));
    // 100 samples, 30 distinct
    std::vector<std::string> batch;
    for (int i = 0; i < 100; ++i) batch.push_back("a=" + std::to_string(i % 30));
    CHECK(unique_ratio(batch) == doctest::Approx(0.30));
    CHECK(unique_ratio({}) == 0.0);
}

TEST_CASE("evaluate: gold-echoing sampler scores 1.0 everywhere") {
    const auto tasks = toy_tasks();
    const Vocabulary vocab = toy_vocab(tasks);

    std::vector<std::pair<std::vector<int>, std::vector<int>>> echo;
    for (const Task& t : tasks) {
        echo.emplace_back(vocab.encode_words(t.nl), vocab.encode_program(t.gold));
    }
    const Sampler gold_echo = [&echo](const std::vector<int>& x, double, int, Rng&) {
        for (const auto& [ex, ey] : echo) {
            if (ex == x) return ey;
        }
        return std::vector<int>{};
    };

    EvalConfig cfg;
    cfg.k_list = {1, 5, 10};
    cfg.n = 10;
    const EvalReport rep = evaluate_with(gold_echo, vocab, tasks, cfg, 1);
    CHECK(rep.pass_at.at(1) == 1.0);
    CHECK(rep.pass_at.at(5) == 1.0);
    CHECK(rep.pass_at.at(10) == 1.0);
    for (const TaskEval& t : rep.per_task) {
        CHECK(t.c == 10);
        CHECK(t.pass1);
        CHECK(t.unique == doctest::Approx(0.1));  // one distinct program
    }
}

TEST_CASE("evaluate: unparseable sampler scores 0.0 and dumps samples") {
    const auto tasks = toy_tasks();
    const Vocabulary vocab = toy_vocab(tasks);
    const Sampler junk = [](const std::vector<int>&, double, int, Rng&) {
        return std::vector<int>{Vocabulary::kUnk, Vocabulary::kUnk};
    };

    const std::string dump =
        (std::filesystem::temp_directory_path() / "eval_dump.jsonl").string();
    EvalConfig cfg;
    cfg.k_list = {1, 5};
    cfg.n = 5;
    cfg.sample_dump_path = dump;
    const EvalReport rep = evaluate_with(junk, vocab, tasks, cfg, 1);
    CHECK(rep.pass_at.at(1) == 0.0);
    CHECK(rep.pass_at.at(5) == 0.0);
    CHECK(rep.unique_ratio == doctest::Approx(0.2));  // 1 distinct raw text of 5

    std::ifstream in(dump);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(line.find("\"task_id\"") != std::string::npos);
        CHECK(line.find("\"samples\"") != std::string::npos);
        CHECK(line.find("\"correct_mask\"") != std::string::npos);
        CHECK(line.find("false") != std::string::npos);
    }
    CHECK(lines == 2);
    std::remove(dump.c_str());
}

TEST_CASE("evaluate: mixed sampler, determinism, thread invariance") {
    const auto tasks = toy_tasks();
    const Vocabulary vocab = toy_vocab(tasks);
    std::vector<std::pair<std::vector<int>, std::vector<int>>> echo;
    for (const Task& t : tasks) {
        echo.emplace_back(vocab.encode_words(t.nl), vocab.encode_program(t.gold));
    }
    // correct with probability ~1/2, driven by the per-draw rng
    const Sampler coin = [&echo](const std::vector<int>& x, double, int, Rng& rng) {
        const bool heads = rng.below(2) == 0;
        for (const auto& [ex, ey] : echo) {
            if (ex == x && heads) return ey;
        }
        return std::vector<int>{Vocabulary::kUnk};
    };

    EvalConfig cfg;
    cfg.k_list = {1, 5, 10, 20};
    cfg.n = 20;
    const EvalReport a = evaluate_with(coin, vocab, tasks, cfg, 123);
    const EvalReport b = evaluate_with(coin, vocab, tasks, cfg, 123);
    CHECK(a.to_json() == b.to_json());

    EvalConfig threaded = cfg;
    threaded.threads = 4;
    const EvalReport c = evaluate_with(coin, vocab, tasks, threaded, 123);
    CHECK(c.to_json() == a.to_json());

    const EvalReport d = evaluate_with(coin, vocab, tasks, cfg, 124);
    CHECK(d.to_json() != a.to_json());

    // per-task counts feed the estimator directly
    for (const TaskEval& t : a.per_task) {
        CHECK(t.c > 2);
        CHECK(t.c < 18);
    }
    CHECK(a.pass_at.at(20) == 1.0);  // every task has at least one hit
    CHECK(a.pass_at.at(5) <= a.pass_at.at(10));
    CHECK(a.pass_at.at(10) <= a.pass_at.at(20));
}

TEST_CASE("evaluate validation") {
    const auto tasks = toy_tasks();
    const Vocabulary vocab = toy_vocab(tasks);
    const Sampler junk = [](const std::vector<int>&, double, int, Rng&) {
        return std::vector<int>{Vocabulary::kUnk};
    };
    EvalConfig cfg;
    cfg.k_list = {1, 5};
    cfg.n = 4;  // below max k
    CHECK_THROWS_AS(evaluate_with(junk, vocab, tasks, cfg, 1), InvalidArguments);
    cfg.n = 5;
    cfg.k_list.clear();
    CHECK_THROWS_AS(evaluate_with(junk, vocab, tasks, cfg, 1), InvalidArguments);
    cfg.k_list = {1};
    CHECK_THROWS_AS(evaluate_with(junk, vocab, {}, cfg, 1), InvalidArguments);
}
