#include "losses.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace selfsynth {

const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::Mle: return "mle";
        case LossKind::MleAug: return "mle_aug";
        case LossKind::Mml: return "mml";
        case LossKind::BetaMml: return "beta_mml";
    }
    return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "mle") return LossKind::Mle;
    if (name == "mle_aug") return LossKind::MleAug;
    if (name == "mml") return LossKind::Mml;
    if (name == "beta_mml") return LossKind::BetaMml;
    throw InvalidArguments("unknown loss kind: " + name);
}

namespace {

void check_spec(const LossSpec& spec, size_t n_targets) {
    if (n_targets == 0) throw EmptyTargets("loss requires at least one target");
    if (spec.kind == LossKind::BetaMml && !(spec.beta > 0.0 && spec.beta <= 1.0)) {
        throw BetaOutOfRange("beta must lie in (0, 1], got " + std::to_string(spec.beta));
    }
    if (spec.kind == LossKind::Mle && n_targets != 1) {
        throw InvalidArguments("MLE takes exactly the gold target");
    }
}

// softmax of beta * logprobs; the shared weight rule of MML (beta = 1)
// and beta-MML
std::vector<double> scaled_softmax(const std::vector<double>& lp, double beta) {
    const double mx = *std::max_element(lp.begin(), lp.end());
    std::vector<double> w(lp.size());
    double sum = 0.0;
    for (size_t i = 0; i < lp.size(); ++i) {
        w[i] = std::exp(beta * (lp[i] - mx));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// log sum_i exp(beta * lp_i), stable
double scaled_lse(const std::vector<double>& lp, double beta) {
    const double mx = *std::max_element(lp.begin(), lp.end());
    double sum = 0.0;
    for (double v : lp) sum += std::exp(beta * (v - mx));
    return beta * mx + std::log(sum);
}

}  // namespace

Combined combine_target_logprobs(const LossSpec& spec, const std::vector<double>& logprobs) {
    check_spec(spec, logprobs.size());
    Combined out;
    switch (spec.kind) {
        case LossKind::Mle:
            out.loss = -logprobs[0];
            out.weights = {1.0};
            break;
        case LossKind::MleAug: {
            double total = 0.0;
            for (double lp : logprobs) total += lp;
            out.loss = -total;
            out.weights.assign(logprobs.size(), 1.0);
            break;
        }
        case LossKind::Mml:
            out.loss = -scaled_lse(logprobs, 1.0);
            out.weights = scaled_softmax(logprobs, 1.0);
            break;
        case LossKind::BetaMml:
            out.loss = -scaled_lse(logprobs, spec.beta) / spec.beta;
            out.weights = scaled_softmax(logprobs, spec.beta);
            break;
    }
    return out;
}

LossResult loss_and_grad(const LossSpec& spec, const Model& model, std::span<const int> x_tokens,
                         const std::vector<Target>& targets) {
    check_spec(spec, targets.size());

    LossResult out;
    out.logprobs.reserve(targets.size());
    std::vector<std::vector<double>> grads(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
        const LogprobResult lr =
            model.logprob_with_grad(x_tokens, targets[i].y_tokens, targets[i].complete, grads[i]);
        out.logprobs.push_back(lr.total);
    }

    const Combined c = combine_target_logprobs(spec, out.logprobs);
    out.loss = c.loss;
    out.weights = c.weights;
    out.grad.assign(model.param_count(), 0.0);
    for (size_t i = 0; i < targets.size(); ++i) {
        const double w = out.weights[i];
        for (size_t j = 0; j < out.grad.size(); ++j) out.grad[j] -= w * grads[i][j];
    }
    return out;
}

InterpolationDiag interpolation_check(const Model& model, std::span<const int> x_tokens,
                                      const std::vector<Target>& targets, double beta_small) {
    if (targets.size() < 2) throw InvalidArguments("interpolation check needs >= 2 targets");

    const LossResult mml = loss_and_grad({LossKind::Mml, 0.0}, model, x_tokens, targets);
    const LossResult beta1 = loss_and_grad({LossKind::BetaMml, 1.0}, model, x_tokens, targets);
    const LossResult beta0 =
        loss_and_grad({LossKind::BetaMml, beta_small}, model, x_tokens, targets);
    const LossResult aug = loss_and_grad({LossKind::MleAug, 0.0}, model, x_tokens, targets);

    InterpolationDiag d;
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    for (size_t j = 0; j < mml.grad.size(); ++j) {
        d.beta_one_vs_mml = std::max(d.beta_one_vs_mml, std::abs(beta1.grad[j] - mml.grad[j]));
        d.beta_zero_vs_mle_aug =
            std::max(d.beta_zero_vs_mle_aug, std::abs(beta0.grad[j] - inv_n * aug.grad[j]));
    }
    return d;
}

}  // namespace selfsynth
