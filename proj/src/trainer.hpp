#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "buffer.hpp"
#include "checkpoint.hpp"
#include "data.hpp"
#include "eval.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "vocab.hpp"

namespace selfsynth {

enum class TrainMode { MleOnly, FcpOnly, FcpPlusPcp };

const char* train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
    int steps = 500;
    int batch_size = 8;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.1;
    int warmup_steps = 100;
    double grad_clip = 1.0;
    int samples_per_task_per_batch = 1;
    double sample_temperature = 0.8;
    int max_new_tokens = 96;
    LossSpec loss{LossKind::Mml, 0.25};
    TrainMode mode = TrainMode::FcpPlusPcp;
    uint64_t seed = 0;
    int eval_every = 50;
    int length_slack = 0;
    int threads = 1;

    // reduced-cost dev protocol used during training
    int eval_n = 10;
    std::vector<int> eval_k = {5, 10};
    double eval_t_low = 0.2;
    double eval_t_high = 0.8;

    ModelConfig model;  // vocab_size is derived from the corpus

    void validate() const;  // InvalidArguments
    static TrainConfig from_json(const std::string& text);  // MalformedRecord
    std::string to_json() const;
};

struct TrainState {
    TrainConfig cfg;
    Vocabulary vocab;
    Model model;
    AdamState opt;
    int64_t step = 0;
    std::map<std::string, ProgramBuffer> buffers;            // task id -> buffer
    std::unordered_map<std::string, std::vector<int>> x_cache;  // task id -> encoded nl
};

// Builds vocabulary over both datasets, initializes parameters from
// cfg.seed, and seeds one buffer per train task.
TrainState init_train_state(const TrainConfig& cfg, const std::vector<Task>& train_tasks,
                            const std::vector<Task>& dev_tasks);

struct SampledProgram {
    std::string text;
    std::optional<Program> program;  // nullopt: unparseable (kept as data)
    size_t start_lines = 0;          // lines of the buffer entry the draw started from
};

// One guided draw per sample: uniform start among sampling_starts (never an
// FCP), completion at `temperature`, concatenation, parse attempt.
std::vector<SampledProgram> sample_programs(const Model& model, const Vocabulary& vocab,
                                            const Task& task, const ProgramBuffer& buffer,
                                            int n, double temperature, int max_new, Rng& rng);

struct UpdateStats {
    double mean_loss = 0.0;
    double grad_norm = 0.0;       // pre-clip
    double grad_norm_post = 0.0;  // post-clip
    int sampled = 0;
    int unparseable = 0;
    int inserted_fcp = 0;
    int inserted_pcp = 0;
};

// linear warmup to lr, then linear decay to 0 at cfg.steps
double lr_at(const TrainConfig& cfg, int64_t step);

// One optimizer step over a batch of train-task indices: sample/classify/
// insert per mode, per-task loss over the buffer's targets, gradient
// averaged in task order, clipped, AdamW applied.
UpdateStats training_update(TrainState& state, const std::vector<Task>& tasks,
                            const std::vector<size_t>& batch);

struct TrainArtifacts {
    std::string metrics_path;
    std::string best_checkpoint_path;
    std::string final_checkpoint_path;
    std::string buffer_dump_path;
    double best_pass1 = 0.0;
    int64_t best_step = 0;
    double final_avg_fcp = 0.0;  // gold excluded
    double final_avg_pcp = 0.0;
};

// Full loop: shuffled epochs, dev metrics every eval_every steps (and at
// step 0), best-pass@1 checkpoint retention, final buffer dump.
TrainArtifacts train(const TrainConfig& cfg, const std::vector<Task>& train_tasks,
                     const std::vector<Task>& dev_tasks, const std::string& out_dir);

}  // namespace selfsynth
