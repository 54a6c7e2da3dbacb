#pragma once

#include <span>
#include <string>
#include <vector>

#include "model.hpp"

namespace selfsynth {

enum class LossKind { Mle, MleAug, Mml, BetaMml };

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);  // throws InvalidArguments

struct LossSpec {
    LossKind kind = LossKind::Mle;
    double beta = 0.25;  // BETA_MML only
};

// One training target: tokenized program plus whether it is a complete
// program (gold/FCP, gets an EOS) or an open prefix (PCP, no EOS).
struct Target {
    std::vector<int> y_tokens;
    bool complete = true;
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;     // d loss / d params
    std::vector<double> weights;  // per-target gradient weight, for inspection
    std::vector<double> logprobs; // per-target total log-probability
};

// Pure combination core: maps per-target total log-probabilities to the loss
// value and the per-target gradient weights, so that
//   grad(loss) = -sum_t weights[t] * grad(logprob[t]).
// Testable against scalar evaluations of the objective formulas.
struct Combined {
    double loss = 0.0;
    std::vector<double> weights;
};
Combined combine_target_logprobs(const LossSpec& spec, const std::vector<double>& logprobs);

LossResult loss_and_grad(const LossSpec& spec, const Model& model, std::span<const int> x_tokens,
                         const std::vector<Target>& targets);

struct InterpolationDiag {
    double beta_one_vs_mml = 0.0;       // max-norm gradient difference
    double beta_zero_vs_mle_aug = 0.0;  // vs (1/|targets|) * MLE-Aug gradient
};
InterpolationDiag interpolation_check(const Model& model, std::span<const int> x_tokens,
                                      const std::vector<Target>& targets, double beta_small = 1e-6);

}  // namespace selfsynth
