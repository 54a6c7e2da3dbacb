#include "model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace selfsynth {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;
using MapV = Eigen::Map<Eigen::VectorXd>;
using CMapV = Eigen::Map<const Eigen::VectorXd>;

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

double gelu(double x) {
    const double u = kGeluC * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
    const double u = kGeluC * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// Offsets of every tensor inside the flat parameter vector.
struct Layout {
    int D, H, L, F, V, C;

    struct LayerOff {
        size_t ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o;
        size_t ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
    };

    size_t wte, wpe, lnf_g, lnf_b, w_un;
    std::vector<LayerOff> layers;
    size_t total;

    explicit Layout(const ModelConfig& c)
        : D(c.d_model), H(c.n_heads), L(c.n_layers), F(c.d_ff), V(c.vocab_size), C(c.context) {
        size_t off = 0;
        auto take = [&off](size_t n) {
            const size_t at = off;
            off += n;
            return at;
        };
        wte = take(static_cast<size_t>(V) * D);
        wpe = take(static_cast<size_t>(C) * D);
        layers.resize(L);
        for (auto& l : layers) {
            l.ln1_g = take(D);
            l.ln1_b = take(D);
            l.w_qkv = take(static_cast<size_t>(D) * 3 * D);
            l.b_qkv = take(3 * static_cast<size_t>(D));
            l.w_o = take(static_cast<size_t>(D) * D);
            l.b_o = take(D);
            l.ln2_g = take(D);
            l.ln2_b = take(D);
            l.w_fc = take(static_cast<size_t>(D) * F);
            l.b_fc = take(F);
            l.w_proj = take(static_cast<size_t>(F) * D);
            l.b_proj = take(D);
        }
        lnf_g = take(D);
        lnf_b = take(D);
        w_un = take(static_cast<size_t>(D) * V);
        total = off;
    }
};

constexpr double kLnEps = 1e-5;

// y = xhat * g + b rowwise; caches xhat and rstd for the backward pass
void layernorm_forward(const MatRM& x, CMapV g, CMapV b, MatRM& xhat, Eigen::VectorXd& rstd,
                       MatRM& out) {
    const Eigen::Index T = x.rows(), D = x.cols();
    xhat.resize(T, D);
    rstd.resize(T);
    out.resize(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
        const double mean = x.row(t).mean();
        const double var = (x.row(t).array() - mean).square().mean();
        const double r = 1.0 / std::sqrt(var + kLnEps);
        rstd(t) = r;
        xhat.row(t) = (x.row(t).array() - mean) * r;
        out.row(t) = xhat.row(t).array() * g.transpose().array() + b.transpose().array();
    }
}

void layernorm_backward(const MatRM& dout, const MatRM& xhat, const Eigen::VectorXd& rstd,
                        CMapV g, MatRM& dx, MapV dg, MapV db) {
    const Eigen::Index T = dout.rows(), D = dout.cols();
    dx.resize(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
        dg += (dout.row(t).array() * xhat.row(t).array()).matrix().transpose();
        db += dout.row(t).transpose();
        const Eigen::ArrayXd dxhat = dout.row(t).transpose().array() * g.array();
        const double m1 = dxhat.mean();
        const double m2 = (dxhat * xhat.row(t).transpose().array()).mean();
        dx.row(t) = (rstd(t) * (dxhat - m1 - xhat.row(t).transpose().array() * m2)).transpose();
    }
}

struct LayerCache {
    MatRM input;  // residual stream entering the layer
    MatRM ln1_xhat, ln1_out;
    Eigen::VectorXd ln1_rstd;
    MatRM qkv;                  // T x 3D
    std::vector<MatRM> probs;   // per head, T x T causal attention weights
    MatRM ctx;                  // T x D
    MatRM resid1;               // input + attention output
    MatRM ln2_xhat, ln2_out;
    Eigen::VectorXd ln2_rstd;
    MatRM ff_pre, ff_act;       // T x F
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    MatRM final_in;  // residual stream entering the final norm
    MatRM lnf_xhat, lnf_out;
    Eigen::VectorXd lnf_rstd;
    MatRM logits;  // T x V
};

class Net {
public:
    Net(const ModelConfig& cfg, const std::vector<double>& params)
        : cfg_(cfg), lay_(cfg), p_(params.data()) {}

    const Layout& layout() const { return lay_; }

    CMapM mat(size_t off, int rows, int cols) const { return CMapM(p_ + off, rows, cols); }
    CMapV vec(size_t off, int n) const { return CMapV(p_ + off, n); }

    void forward(const std::vector<int>& ids, ForwardCache& fc) const {
        const int T = static_cast<int>(ids.size());
        const int D = lay_.D, H = lay_.H, dh = D / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        const auto wte = mat(lay_.wte, lay_.V, D);
        const auto wpe = mat(lay_.wpe, lay_.C, D);

        MatRM x(T, D);
        for (int t = 0; t < T; ++t) x.row(t) = wte.row(ids[t]) + wpe.row(t);

        fc.layers.resize(lay_.L);
        for (int l = 0; l < lay_.L; ++l) {
            const auto& o = lay_.layers[l];
            LayerCache& c = fc.layers[l];
            c.input = x;

            layernorm_forward(c.input, vec(o.ln1_g, D), vec(o.ln1_b, D), c.ln1_xhat, c.ln1_rstd,
                              c.ln1_out);
            c.qkv = c.ln1_out * mat(o.w_qkv, D, 3 * D);
            c.qkv.rowwise() += vec(o.b_qkv, 3 * D).transpose();

            c.probs.assign(H, MatRM());
            c.ctx = MatRM::Zero(T, D);
            for (int h = 0; h < H; ++h) {
                const auto q = c.qkv.block(0, h * dh, T, dh);
                const auto k = c.qkv.block(0, D + h * dh, T, dh);
                const auto v = c.qkv.block(0, 2 * D + h * dh, T, dh);
                MatRM& a = c.probs[h];
                a = MatRM::Zero(T, T);
                for (int t = 0; t < T; ++t) {
                    Eigen::VectorXd s = (k.topRows(t + 1) * q.row(t).transpose()) * scale;
                    const double mx = s.maxCoeff();
                    Eigen::ArrayXd e = (s.array() - mx).exp();
                    a.row(t).head(t + 1) = (e / e.sum()).transpose();
                }
                c.ctx.block(0, h * dh, T, dh) = a * v;
            }

            MatRM attn_out = c.ctx * mat(o.w_o, D, D);
            attn_out.rowwise() += vec(o.b_o, D).transpose();
            c.resid1 = c.input + attn_out;

            layernorm_forward(c.resid1, vec(o.ln2_g, D), vec(o.ln2_b, D), c.ln2_xhat, c.ln2_rstd,
                              c.ln2_out);
            c.ff_pre = c.ln2_out * mat(o.w_fc, D, lay_.F);
            c.ff_pre.rowwise() += vec(o.b_fc, lay_.F).transpose();
            c.ff_act = c.ff_pre.unaryExpr([](double v) { return gelu(v); });
            MatRM ff_out = c.ff_act * mat(o.w_proj, lay_.F, D);
            ff_out.rowwise() += vec(o.b_proj, D).transpose();
            x = c.resid1 + ff_out;
        }

        fc.final_in = x;
        layernorm_forward(fc.final_in, vec(lay_.lnf_g, D), vec(lay_.lnf_b, D), fc.lnf_xhat,
                          fc.lnf_rstd, fc.lnf_out);
        fc.logits = fc.lnf_out * mat(lay_.w_un, D, lay_.V);
    }

    // dlogits is the gradient of the objective with respect to the logits.
    void backward(const std::vector<int>& ids, const ForwardCache& fc, const MatRM& dlogits,
                  std::vector<double>& grad) const {
        const int T = static_cast<int>(ids.size());
        const int D = lay_.D, H = lay_.H, dh = D / H, F = lay_.F;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        double* g = grad.data();
        auto gmat = [&](size_t off, int rows, int cols) { return MapM(g + off, rows, cols); };
        auto gvec = [&](size_t off, int n) { return MapV(g + off, n); };

        gmat(lay_.w_un, D, lay_.V) += fc.lnf_out.transpose() * dlogits;
        MatRM dlnf_out = dlogits * mat(lay_.w_un, D, lay_.V).transpose();

        MatRM dx;
        layernorm_backward(dlnf_out, fc.lnf_xhat, fc.lnf_rstd, vec(lay_.lnf_g, D), dx,
                           gvec(lay_.lnf_g, D), gvec(lay_.lnf_b, D));

        for (int l = lay_.L - 1; l >= 0; --l) {
            const auto& o = lay_.layers[l];
            const LayerCache& c = fc.layers[l];

            // MLP branch
            MatRM dff_out = dx;  // residual passthrough stays in dx
            gvec(o.b_proj, D) += dff_out.colwise().sum().transpose();
            gmat(o.w_proj, F, D) += c.ff_act.transpose() * dff_out;
            MatRM dff_act = dff_out * mat(o.w_proj, F, D).transpose();
            MatRM dff_pre =
                dff_act.binaryExpr(c.ff_pre, [](double d, double x) { return d * gelu_grad(x); });
            gvec(o.b_fc, F) += dff_pre.colwise().sum().transpose();
            gmat(o.w_fc, D, F) += c.ln2_out.transpose() * dff_pre;
            MatRM dln2_out = dff_pre * mat(o.w_fc, D, F).transpose();

            MatRM dresid1;
            layernorm_backward(dln2_out, c.ln2_xhat, c.ln2_rstd, vec(o.ln2_g, D), dresid1,
                               gvec(o.ln2_g, D), gvec(o.ln2_b, D));
            dresid1 += dx;

            // attention branch
            MatRM dattn_out = dresid1;
            gvec(o.b_o, D) += dattn_out.colwise().sum().transpose();
            gmat(o.w_o, D, D) += c.ctx.transpose() * dattn_out;
            MatRM dctx = dattn_out * mat(o.w_o, D, D).transpose();

            MatRM dqkv = MatRM::Zero(T, 3 * D);
            for (int h = 0; h < H; ++h) {
                const auto q = c.qkv.block(0, h * dh, T, dh);
                const auto k = c.qkv.block(0, D + h * dh, T, dh);
                const auto v = c.qkv.block(0, 2 * D + h * dh, T, dh);
                const MatRM& a = c.probs[h];
                const auto dctx_h = dctx.block(0, h * dh, T, dh);

                dqkv.block(0, 2 * D + h * dh, T, dh) += a.transpose() * dctx_h;
                MatRM da = dctx_h * v.transpose();
                // softmax backward, causal rows
                for (int t = 0; t < T; ++t) {
                    const auto arow = a.row(t).head(t + 1).array();
                    const auto darow = da.row(t).head(t + 1).array();
                    const double dot = (arow * darow).sum();
                    Eigen::RowVectorXd ds = (arow * (darow - dot)).matrix() * scale;
                    dqkv.block(t, h * dh, 1, dh) += ds * k.topRows(t + 1);
                    dqkv.block(0, D + h * dh, t + 1, dh) += ds.transpose() * q.row(t);
                }
            }

            gvec(o.b_qkv, 3 * D) += dqkv.colwise().sum().transpose();
            gmat(o.w_qkv, D, 3 * D) += c.ln1_out.transpose() * dqkv;
            MatRM dln1_out = dqkv * mat(o.w_qkv, D, 3 * D).transpose();

            MatRM dinput;
            layernorm_backward(dln1_out, c.ln1_xhat, c.ln1_rstd, vec(o.ln1_g, D), dinput,
                               gvec(o.ln1_g, D), gvec(o.ln1_b, D));
            dx = dinput + dresid1;
        }

        auto dwte = gmat(lay_.wte, lay_.V, D);
        auto dwpe = gmat(lay_.wpe, lay_.C, D);
        for (int t = 0; t < T; ++t) {
            dwte.row(ids[t]) += dx.row(t);
            dwpe.row(t) += dx.row(t);
        }
    }

private:
    ModelConfig cfg_;
    Layout lay_;
    const double* p_;
};

// Incremental decoder used for sampling; numerically equivalent to the batch
// forward up to summation order.
class IncrementalNet {
public:
    IncrementalNet(const ModelConfig& cfg, const std::vector<double>& params)
        : lay_(cfg), p_(params.data()) {
        k_cache_.assign(lay_.L, MatRM::Zero(lay_.C, lay_.D));
        v_cache_.assign(lay_.L, MatRM::Zero(lay_.C, lay_.D));
    }

    int length() const { return t_; }

    // Consumes one token and returns the logits for the next position.
    Eigen::VectorXd feed(int id) {
        if (t_ >= lay_.C) throw ContextOverflow("sequence exceeds model context");
        const int D = lay_.D, H = lay_.H, dh = D / H, F = lay_.F;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        Eigen::VectorXd x = CMapM(p_ + lay_.wte, lay_.V, D).row(id).transpose() +
                            CMapM(p_ + lay_.wpe, lay_.C, D).row(t_).transpose();

        for (int l = 0; l < lay_.L; ++l) {
            const auto& o = lay_.layers[l];
            Eigen::VectorXd ln1 = layernorm(x, o.ln1_g, o.ln1_b);
            Eigen::VectorXd qkv =
                CMapM(p_ + o.w_qkv, D, 3 * D).transpose() * ln1 + CMapV(p_ + o.b_qkv, 3 * D);
            k_cache_[l].row(t_) = qkv.segment(D, D).transpose();
            v_cache_[l].row(t_) = qkv.segment(2 * D, D).transpose();

            Eigen::VectorXd ctx(D);
            for (int h = 0; h < H; ++h) {
                const auto k = k_cache_[l].block(0, h * dh, t_ + 1, dh);
                const auto v = v_cache_[l].block(0, h * dh, t_ + 1, dh);
                Eigen::VectorXd s = (k * qkv.segment(h * dh, dh)) * scale;
                const double mx = s.maxCoeff();
                Eigen::ArrayXd e = (s.array() - mx).exp();
                Eigen::VectorXd a = e / e.sum();
                ctx.segment(h * dh, dh) = v.transpose() * a;
            }
            x += CMapM(p_ + o.w_o, D, D).transpose() * ctx + CMapV(p_ + o.b_o, D);

            Eigen::VectorXd ln2 = layernorm(x, o.ln2_g, o.ln2_b);
            Eigen::VectorXd ff =
                CMapM(p_ + o.w_fc, D, F).transpose() * ln2 + CMapV(p_ + o.b_fc, F);
            for (int i = 0; i < F; ++i) ff(i) = gelu(ff(i));
            x += CMapM(p_ + o.w_proj, F, D).transpose() * ff + CMapV(p_ + o.b_proj, D);
        }

        Eigen::VectorXd lnf = layernorm(x, lay_.lnf_g, lay_.lnf_b);
        ++t_;
        return CMapM(p_ + lay_.w_un, lay_.D, lay_.V).transpose() * lnf;
    }

private:
    Eigen::VectorXd layernorm(const Eigen::VectorXd& x, size_t g_off, size_t b_off) const {
        const double mean = x.mean();
        const double var = (x.array() - mean).square().mean();
        const double r = 1.0 / std::sqrt(var + kLnEps);
        return ((x.array() - mean) * r) * CMapV(p_ + g_off, lay_.D).array() +
               CMapV(p_ + b_off, lay_.D).array();
    }

    Layout lay_;
    const double* p_;
    std::vector<MatRM> k_cache_, v_cache_;
    int t_ = 0;
};

}  // namespace

Model::Model(ModelConfig cfg) : cfg_(cfg) {
    if (cfg_.vocab_size <= 0) throw InvalidArguments("model requires a positive vocab size");
    if (cfg_.d_model % cfg_.n_heads != 0) {
        throw InvalidArguments("d_model must be divisible by n_heads");
    }
    params_.assign(Layout(cfg_).total, 0.0);
}

Model Model::init(ModelConfig cfg, uint64_t seed) {
    Model m(cfg);
    const Layout lay(cfg);
    Rng rng(splitmix64(seed ^ 0x6d6f64656cull));
    auto fill_normal = [&](size_t off, size_t n, double std) {
        for (size_t i = 0; i < n; ++i) m.params_[off + i] = rng.normal() * std;
    };
    auto fill_const = [&](size_t off, size_t n, double v) {
        std::fill_n(m.params_.begin() + off, n, v);
    };
    const int D = cfg.d_model, F = cfg.d_ff;
    const double w_std = 0.02;
    const double resid_std = w_std / std::sqrt(2.0 * cfg.n_layers);
    fill_normal(lay.wte, static_cast<size_t>(cfg.vocab_size) * D, w_std);
    fill_normal(lay.wpe, static_cast<size_t>(cfg.context) * D, 0.01);
    for (const auto& o : lay.layers) {
        fill_const(o.ln1_g, D, 1.0);
        fill_normal(o.w_qkv, static_cast<size_t>(D) * 3 * D, w_std);
        fill_normal(o.w_o, static_cast<size_t>(D) * D, resid_std);
        fill_const(o.ln2_g, D, 1.0);
        fill_normal(o.w_fc, static_cast<size_t>(D) * F, w_std);
        fill_normal(o.w_proj, static_cast<size_t>(F) * D, resid_std);
    }
    fill_const(lay.lnf_g, D, 1.0);
    fill_normal(lay.w_un, static_cast<size_t>(D) * cfg.vocab_size, w_std);
    return m;
}

std::vector<int> Model::encode(std::span<const int> x_tokens, std::span<const int> y_tokens,
                               bool complete) const {
    std::vector<int> ids;
    ids.reserve(x_tokens.size() + y_tokens.size() + 3);
    ids.push_back(Vocabulary::kBos);
    ids.insert(ids.end(), x_tokens.begin(), x_tokens.end());
    ids.push_back(Vocabulary::kSep);
    ids.insert(ids.end(), y_tokens.begin(), y_tokens.end());
    if (complete) ids.push_back(Vocabulary::kEos);
    if (static_cast<int>(ids.size()) > cfg_.context) {
        throw ContextOverflow("encoded example of " + std::to_string(ids.size()) +
                              " tokens exceeds context " + std::to_string(cfg_.context));
    }
    return ids;
}

LogprobResult Model::logprob(std::span<const int> x_tokens, std::span<const int> y_tokens,
                             bool complete) const {
    const std::vector<int> ids = encode(x_tokens, y_tokens, complete);
    const int sep = static_cast<int>(x_tokens.size()) + 1;
    const int T = static_cast<int>(ids.size());

    LogprobResult out;
    if (T - 1 - sep <= 0) return out;

    ForwardCache fc;
    Net(cfg_, params_).forward(ids, fc);
    for (int p = sep; p < T - 1; ++p) {
        const auto row = fc.logits.row(p);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        out.per_token.push_back(row(ids[p + 1]) - lse);
        out.total += out.per_token.back();
    }
    return out;
}

LogprobResult Model::logprob_with_grad(std::span<const int> x_tokens,
                                       std::span<const int> y_tokens, bool complete,
                                       std::vector<double>& grad_out) const {
    grad_out.assign(params_.size(), 0.0);
    const std::vector<int> ids = encode(x_tokens, y_tokens, complete);
    const int sep = static_cast<int>(x_tokens.size()) + 1;
    const int T = static_cast<int>(ids.size());

    LogprobResult out;
    if (T - 1 - sep <= 0) return out;

    const Net net(cfg_, params_);
    ForwardCache fc;
    net.forward(ids, fc);

    MatRM dlogits = MatRM::Zero(T, cfg_.vocab_size);
    for (int p = sep; p < T - 1; ++p) {
        const auto row = fc.logits.row(p);
        const double mx = row.maxCoeff();
        Eigen::ArrayXd e = (row.array() - mx).exp().transpose();
        const double sum = e.sum();
        out.per_token.push_back(row(ids[p + 1]) - (mx + std::log(sum)));
        out.total += out.per_token.back();
        dlogits.row(p) = (-(e / sum)).transpose();
        dlogits(p, ids[p + 1]) += 1.0;
    }
    net.backward(ids, fc, dlogits, grad_out);
    return out;
}

std::vector<double> softmax_with_temperature(const std::vector<double>& logits,
                                             double temperature) {
    if (temperature <= 0.0) throw InvalidArguments("softmax temperature must be positive");
    std::vector<double> probs(logits.size());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp((logits[i] - mx) / temperature);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

std::vector<int> Model::sample_completion(std::span<const int> x_tokens,
                                          std::span<const int> prefix_tokens, double temperature,
                                          int max_new, Rng& rng) const {
    if (temperature < 0.0) throw InvalidArguments("temperature must be >= 0");
    std::vector<int> prompt;
    prompt.reserve(x_tokens.size() + prefix_tokens.size() + 2);
    prompt.push_back(Vocabulary::kBos);
    prompt.insert(prompt.end(), x_tokens.begin(), x_tokens.end());
    prompt.push_back(Vocabulary::kSep);
    prompt.insert(prompt.end(), prefix_tokens.begin(), prefix_tokens.end());
    if (static_cast<int>(prompt.size()) > cfg_.context) {
        throw ContextOverflow("sampling prompt exceeds model context");
    }

    IncrementalNet net(cfg_, params_);
    Eigen::VectorXd logits;
    for (int id : prompt) logits = net.feed(id);

    std::vector<int> out(prefix_tokens.begin(), prefix_tokens.end());
    for (int step = 0; step < max_new && net.length() < cfg_.context; ++step) {
        int next;
        if (temperature == 0.0) {
            Eigen::Index arg;
            logits.maxCoeff(&arg);
            next = static_cast<int>(arg);
        } else {
            Eigen::ArrayXd scaled = (logits.array() - logits.maxCoeff()) / temperature;
            Eigen::ArrayXd probs = scaled.exp();
            probs /= probs.sum();
            const double u = rng.uniform();
            double acc = 0.0;
            next = cfg_.vocab_size - 1;
            for (int i = 0; i < cfg_.vocab_size; ++i) {
                acc += probs(i);
                if (u < acc) {
                    next = i;
                    break;
                }
            }
        }
        if (next == Vocabulary::kEos) break;
        out.push_back(next);
        logits = net.feed(next);
    }
    return out;
}

std::vector<double> Model::next_token_logits(const std::vector<int>& ids) const {
    if (ids.empty()) throw InvalidArguments("next_token_logits requires at least one token");
    IncrementalNet net(cfg_, params_);
    Eigen::VectorXd logits;
    for (int id : ids) logits = net.feed(id);
    return std::vector<double>(logits.data(), logits.data() + logits.size());
}

}  // namespace selfsynth
