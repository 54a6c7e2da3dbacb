#include "eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "rng.hpp"
#include "threadpool.hpp"

namespace selfsynth {

double pass_at_k(int n, int c, int k) {
    if (k < 1 || k > n || c < 0 || c > n) {
        throw InvalidArguments("pass@k needs 1 <= k <= n and 0 <= c <= n, got n=" +
                               std::to_string(n) + " c=" + std::to_string(c) +
                               " k=" + std::to_string(k));
    }
    if (c == 0) return 0.0;
    if (n - c < k) return 1.0;
    double miss = 1.0;
    for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
    return 1.0 - miss;
}

double unique_ratio(const std::vector<std::string>& sample_texts) {
    if (sample_texts.empty()) return 0.0;
    std::set<std::string> keys;
    for (const std::string& text : sample_texts) {
        if (const auto p = try_parse(text)) {
            keys.insert("p:" + canonical_key(*p));
        } else {
            keys.insert("r:" + text);
        }
    }
    return static_cast<double>(keys.size()) / static_cast<double>(sample_texts.size());
}

namespace {

bool sample_is_correct(const std::string& text, double gold_result, const EvalConfig& cfg) {
    const auto p = try_parse(text);
    if (!p) return false;
    const ExecResult res = execute(*p, cfg.limits);
    return res.ok() && is_correct(res.answer, gold_result, cfg.tolerance);
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["t_low"] = t_low;
    j["t_high"] = t_high;
    nlohmann::json pk(nlohmann::json::value_t::object);
    for (const auto& [k, v] : pass_at) pk[std::to_string(k)] = v;
    j["pass@k"] = pk;
    j["unique_ratio"] = unique_ratio;
    nlohmann::json arr = nlohmann::json::array();
    for (const TaskEval& t : per_task) {
        arr.push_back({{"task_id", t.task_id},
                       {"n", t.n},
                       {"c", t.c},
                       {"pass1", t.pass1},
                       {"unique_ratio", t.unique}});
    }
    j["per_task"] = arr;
    return j.dump(2);
}

EvalReport evaluate(const Model& model, const Vocabulary& vocab, const std::vector<Task>& tasks,
                    const EvalConfig& cfg, uint64_t seed) {
    return evaluate_with(
        [&model](const std::vector<int>& x, double temp, int max_new, Rng& rng) {
            return model.sample_completion(x, {}, temp, max_new, rng);
        },
        vocab, tasks, cfg, seed);
}

EvalReport evaluate_with(const Sampler& sampler, const Vocabulary& vocab,
                         const std::vector<Task>& tasks, const EvalConfig& cfg, uint64_t seed) {
    if (tasks.empty()) throw InvalidArguments("evaluate needs at least one task");
    if (cfg.k_list.empty()) throw InvalidArguments("evaluate needs at least one k");
    const int max_k = *std::max_element(cfg.k_list.begin(), cfg.k_list.end());
    if (max_k > 1 && cfg.n < max_k) {
        throw InvalidArguments("n=" + std::to_string(cfg.n) + " is below max k=" +
                               std::to_string(max_k));
    }

    struct TaskSlot {
        TaskEval eval;
        std::vector<std::string> samples;
        std::vector<bool> mask;
    };
    std::vector<TaskSlot> slots(tasks.size());

    parallel_for(tasks.size(), cfg.threads, [&](size_t i) {
        const Task& task = tasks[i];
        const std::vector<int> x = vocab.encode_words(task.nl);
        TaskSlot& slot = slots[i];
        slot.eval.task_id = task.id;
        slot.eval.n = cfg.n;

        for (int d = 0; d <= cfg.n; ++d) {
            Rng rng(derive_stream(seed, i, static_cast<uint64_t>(d)));
            const double temp = d == 0 ? cfg.t_low : cfg.t_high;
            const std::vector<int> y = sampler(x, temp, cfg.max_new, rng);
            const std::string text = vocab.decode_program(y);
            const bool ok = sample_is_correct(text, task.gold_result, cfg);
            if (d == 0) {
                slot.eval.pass1 = ok;
            } else {
                slot.eval.c += ok;
                slot.samples.push_back(text);
                slot.mask.push_back(ok);
            }
        }
        slot.eval.unique = unique_ratio(slot.samples);
    });

    EvalReport report;
    report.n = cfg.n;
    report.t_low = cfg.t_low;
    report.t_high = cfg.t_high;
    for (const TaskSlot& s : slots) report.per_task.push_back(s.eval);

    for (int k : cfg.k_list) {
        double acc = 0.0;
        for (const TaskSlot& s : slots) {
            acc += k == 1 ? (s.eval.pass1 ? 1.0 : 0.0) : pass_at_k(cfg.n, s.eval.c, k);
        }
        report.pass_at[k] = acc / static_cast<double>(slots.size());
    }
    double uacc = 0.0;
    for (const TaskSlot& s : slots) uacc += s.eval.unique;
    report.unique_ratio = uacc / static_cast<double>(slots.size());

    if (!cfg.sample_dump_path.empty()) {
        std::ofstream out(cfg.sample_dump_path);
        if (!out) throw IoError("cannot open sample dump for writing: " + cfg.sample_dump_path);
        for (const TaskSlot& s : slots) {
            nlohmann::json j;
            j["task_id"] = s.eval.task_id;
            j["samples"] = s.samples;
            j["correct_mask"] = s.mask;
            out << j.dump() << '\n';
        }
        if (!out) throw IoError("failed writing sample dump: " + cfg.sample_dump_path);
    }
    return report;
}

}  // namespace selfsynth
