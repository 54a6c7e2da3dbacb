#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "vocab.hpp"

namespace selfsynth {

// Decoder-only attention model in 64-bit floats with analytically exact
// gradients. Sequences are encoded as [BOS, x, SEP, y, (EOS iff complete)]
// and log-likelihood is accounted only over the program positions after SEP.

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 256;
    int context = 256;

    int head_dim() const { return d_model / n_heads; }
};

struct LogprobResult {
    double total = 0.0;
    std::vector<double> per_token;  // one entry per y token, plus EOS when complete
};

class Model {
public:
    explicit Model(ModelConfig cfg);  // all-zero parameters

    static Model init(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    size_t param_count() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    std::vector<int> encode(std::span<const int> x_tokens, std::span<const int> y_tokens,
                            bool complete) const;  // throws ContextOverflow

    LogprobResult logprob(std::span<const int> x_tokens, std::span<const int> y_tokens,
                          bool complete) const;

    // Gradient of the total log-probability with respect to every parameter.
    LogprobResult logprob_with_grad(std::span<const int> x_tokens, std::span<const int> y_tokens,
                                    bool complete, std::vector<double>& grad_out) const;

    // Guided decoding: the returned tokens always start with prefix_tokens.
    // temperature 0 decodes greedily (ties break toward the lowest id);
    // generation stops at EOS (not returned), max_new tokens, or the context
    // limit.
    std::vector<int> sample_completion(std::span<const int> x_tokens,
                                       std::span<const int> prefix_tokens, double temperature,
                                       int max_new, Rng& rng) const;

    // Next-token logits after consuming `ids` verbatim (diagnostics/tests).
    std::vector<double> next_token_logits(const std::vector<int>& ids) const;

private:
    ModelConfig cfg_;
    std::vector<double> params_;
};

// Softmax of logits/temperature; temperature must be > 0.
std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double temperature);

}  // namespace selfsynth
