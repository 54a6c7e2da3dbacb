#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"
#include "vocab.hpp"

namespace selfsynth {

// Codex estimator: 1 - C(n-c, k)/C(n, k), computed as the stable product
// 1 - prod_{i=n-c+1..n} (1 - k/i). Throws InvalidArguments outside
// 1 <= k <= n, 0 <= c <= n.
double pass_at_k(int n, int c, int k);

// |distinct canonical keys| / |samples|; unparseable texts count as their
// raw string (kept in a separate namespace so they cannot collide with keys).
double unique_ratio(const std::vector<std::string>& sample_texts);

struct EvalConfig {
    std::vector<int> k_list = {1, 5, 10, 20};
    int n = 20;               // high-temperature samples per task
    double t_low = 0.2;       // single-sample pass@1 temperature
    double t_high = 0.8;
    int max_new = 96;         // generation budget per sample
    int threads = 1;
    Tolerance tolerance;
    ExecLimits limits;
    std::string sample_dump_path;  // when set: one JSONL line per task
};

struct TaskEval {
    std::string task_id;
    int n = 0;
    int c = 0;             // correct among the n samples
    bool pass1 = false;    // the single t_low sample was correct
    double unique = 0.0;   // distinct canonical keys / n
};

struct EvalReport {
    std::map<int, double> pass_at;  // k -> average over tasks
    double unique_ratio = 0.0;      // average over tasks
    int n = 0;
    double t_low = 0.0;
    double t_high = 0.0;
    std::vector<TaskEval> per_task;

    std::string to_json() const;
};

// Per task: one sample at t_low scores pass@1; n samples at t_high give the
// (n, c) counts for every other k. Draw d of task i uses the stream
// derive_stream(seed, i, d), so results do not depend on scheduling.
EvalReport evaluate(const Model& model, const Vocabulary& vocab, const std::vector<Task>& tasks,
                    const EvalConfig& cfg, uint64_t seed);

// Same protocol with the sampling step swapped out (stub generators in tests).
using Sampler = std::function<std::vector<int>(const std::vector<int>& x_tokens,
                                               double temperature, int max_new, Rng& rng)>;
EvalReport evaluate_with(const Sampler& sampler, const Vocabulary& vocab,
                         const std::vector<Task>& tasks, const EvalConfig& cfg, uint64_t seed);

}  // namespace selfsynth
