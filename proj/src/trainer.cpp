#include "trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "threadpool.hpp"

namespace selfsynth {

namespace {

using nlohmann::json;

constexpr uint64_t kEpochSalt = 0x65706f6368ull;  // shuffle streams
constexpr uint64_t kEvalSalt = 0x6576616cull;     // dev-eval streams

}  // namespace

const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::MleOnly: return "MLE_ONLY";
        case TrainMode::FcpOnly: return "FCP_ONLY";
        case TrainMode::FcpPlusPcp: return "FCP_PLUS_PCP";
    }
    return "?";
}

TrainMode train_mode_from_name(const std::string& name) {
    if (name == "MLE_ONLY") return TrainMode::MleOnly;
    if (name == "FCP_ONLY") return TrainMode::FcpOnly;
    if (name == "FCP_PLUS_PCP") return TrainMode::FcpPlusPcp;
    throw InvalidArguments("unknown train mode '" + name + "'");
}

void TrainConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw InvalidArguments(std::string("train config: ") + what);
    };
    need(steps >= 1, "steps must be positive");
    need(batch_size >= 1, "batch_size must be positive");
    need(lr > 0.0, "lr must be positive");
    need(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
    need(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
    need(adam_eps > 0.0, "adam_eps must be positive");
    need(weight_decay >= 0.0, "weight_decay must be nonnegative");
    need(warmup_steps >= 0, "warmup_steps must be nonnegative");
    need(warmup_steps <= steps, "warmup_steps must not exceed steps");
    need(grad_clip > 0.0, "grad_clip must be positive");
    need(samples_per_task_per_batch >= 1, "samples_per_task_per_batch must be positive");
    need(sample_temperature > 0.0, "sample_temperature must be positive");
    need(max_new_tokens >= 1, "max_new_tokens must be positive");
    need(eval_every >= 1, "eval_every must be positive");
    need(length_slack >= 0, "length_slack must be nonnegative");
    need(threads >= 1, "threads must be positive");
    need(!eval_k.empty(), "eval_k must not be empty");
    for (int k : eval_k) need(k >= 1, "eval_k entries must be positive");
    need(eval_n >= *std::max_element(eval_k.begin(), eval_k.end()),
         "eval_n must cover the largest eval_k");
    need(eval_t_low > 0.0 && eval_t_high > 0.0, "eval temperatures must be positive");
    need(model.d_model >= 1 && model.n_heads >= 1 && model.n_layers >= 1 && model.d_ff >= 1 &&
             model.context >= 4,
         "model dimensions must be positive");
    need(model.d_model % model.n_heads == 0, "d_model must be divisible by n_heads");
    if (loss.kind == LossKind::Mle) {
        need(mode == TrainMode::MleOnly, "the mle loss covers only the gold program; use MLE_ONLY");
    }
    if (loss.kind == LossKind::BetaMml) {
        need(loss.beta > 0.0 && loss.beta <= 1.0, "beta must lie in (0, 1]");
    }
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json rec;
    try {
        rec = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedRecord(std::string("train config: ") + e.what());
    }
    if (!rec.is_object()) throw MalformedRecord("train config must be a JSON object");

    TrainConfig cfg;
    try {
        for (const auto& [key, value] : rec.items()) {
            if (key == "steps") cfg.steps = value.get<int>();
            else if (key == "batch_size") cfg.batch_size = value.get<int>();
            else if (key == "lr") cfg.lr = value.get<double>();
            else if (key == "beta1") cfg.beta1 = value.get<double>();
            else if (key == "beta2") cfg.beta2 = value.get<double>();
            else if (key == "adam_eps") cfg.adam_eps = value.get<double>();
            else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
            else if (key == "warmup_steps") cfg.warmup_steps = value.get<int>();
            else if (key == "grad_clip") cfg.grad_clip = value.get<double>();
            else if (key == "samples_per_task_per_batch")
                cfg.samples_per_task_per_batch = value.get<int>();
            else if (key == "sample_temperature") cfg.sample_temperature = value.get<double>();
            else if (key == "max_new_tokens") cfg.max_new_tokens = value.get<int>();
            else if (key == "loss") {
                if (!value.is_object()) throw MalformedRecord("train config: loss must be an object");
                for (const auto& [lk, lv] : value.items()) {
                    if (lk == "kind") cfg.loss.kind = loss_kind_from_name(lv.get<std::string>());
                    else if (lk == "beta") cfg.loss.beta = lv.get<double>();
                    else throw MalformedRecord("train config: unknown loss key '" + lk + "'");
                }
            } else if (key == "mode") cfg.mode = train_mode_from_name(value.get<std::string>());
            else if (key == "seed") cfg.seed = value.get<uint64_t>();
            else if (key == "eval_every") cfg.eval_every = value.get<int>();
            else if (key == "length_slack") cfg.length_slack = value.get<int>();
            else if (key == "threads") cfg.threads = value.get<int>();
            else if (key == "eval_n") cfg.eval_n = value.get<int>();
            else if (key == "eval_k") cfg.eval_k = value.get<std::vector<int>>();
            else if (key == "eval_t_low") cfg.eval_t_low = value.get<double>();
            else if (key == "eval_t_high") cfg.eval_t_high = value.get<double>();
            else if (key == "model") {
                if (!value.is_object())
                    throw MalformedRecord("train config: model must be an object");
                for (const auto& [mk, mv] : value.items()) {
                    if (mk == "d_model") cfg.model.d_model = mv.get<int>();
                    else if (mk == "n_heads") cfg.model.n_heads = mv.get<int>();
                    else if (mk == "n_layers") cfg.model.n_layers = mv.get<int>();
                    else if (mk == "d_ff") cfg.model.d_ff = mv.get<int>();
                    else if (mk == "context") cfg.model.context = mv.get<int>();
                    else throw MalformedRecord("train config: unknown model key '" + mk + "'");
                }
            } else {
                throw MalformedRecord("train config: unknown key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw MalformedRecord(std::string("train config: ") + e.what());
    } catch (const InvalidArguments& e) {
        throw MalformedRecord(std::string("train config: ") + e.what());
    } catch (const BetaOutOfRange& e) {
        throw MalformedRecord(std::string("train config: ") + e.what());
    }
    return cfg;
}

std::string TrainConfig::to_json() const {
    json j;
    j["steps"] = steps;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["adam_eps"] = adam_eps;
    j["weight_decay"] = weight_decay;
    j["warmup_steps"] = warmup_steps;
    j["grad_clip"] = grad_clip;
    j["samples_per_task_per_batch"] = samples_per_task_per_batch;
    j["sample_temperature"] = sample_temperature;
    j["max_new_tokens"] = max_new_tokens;
    j["loss"] = {{"kind", loss_kind_name(loss.kind)}, {"beta", loss.beta}};
    j["mode"] = train_mode_name(mode);
    j["seed"] = seed;
    j["eval_every"] = eval_every;
    j["length_slack"] = length_slack;
    j["threads"] = threads;
    j["eval_n"] = eval_n;
    j["eval_k"] = eval_k;
    j["eval_t_low"] = eval_t_low;
    j["eval_t_high"] = eval_t_high;
    j["model"] = {{"d_model", model.d_model},
                  {"n_heads", model.n_heads},
                  {"n_layers", model.n_layers},
                  {"d_ff", model.d_ff},
                  {"context", model.context}};
    return j.dump(2);
}

TrainState init_train_state(const TrainConfig& cfg, const std::vector<Task>& train_tasks,
                            const std::vector<Task>& dev_tasks) {
    cfg.validate();
    if (train_tasks.empty()) throw InvalidArguments("train set is empty");

    std::vector<std::string> material;
    auto feed = [&material](const std::vector<Task>& tasks) {
        for (const Task& t : tasks) {
            material.insert(material.end(), t.nl.begin(), t.nl.end());
            for (const Statement& s : t.gold.statements) {
                for (const auto& lex : statement_lexemes(s)) material.push_back(lex);
            }
        }
    };
    feed(train_tasks);
    feed(dev_tasks);

    Vocabulary vocab = Vocabulary::build(material);
    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();

    TrainState state{cfg, std::move(vocab), Model::init(mc, cfg.seed), AdamState{}, 0, {}, {}};
    state.opt.m.assign(state.model.param_count(), 0.0);
    state.opt.v.assign(state.model.param_count(), 0.0);

    BufferConfig bc;
    bc.length_slack = cfg.length_slack;
    for (const Task& t : train_tasks) {
        if (!state.buffers.emplace(t.id, ProgramBuffer(t.gold, bc)).second) {
            throw InvalidArguments("duplicate task id '" + t.id + "'");
        }
        state.x_cache.emplace(t.id, state.vocab.encode_words(t.nl));
    }
    return state;
}

std::vector<SampledProgram> sample_programs(const Model& model, const Vocabulary& vocab,
                                            const Task& task, const ProgramBuffer& buffer,
                                            int n, double temperature, int max_new, Rng& rng) {
    if (n < 1) throw InvalidArguments("sample_programs needs n >= 1");
    const std::vector<const Program*> starts = buffer.sampling_starts();
    const std::vector<int> x = vocab.encode_words(task.nl);

    std::vector<SampledProgram> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const Program* start = starts[rng.below(starts.size())];
        const std::vector<int> prefix = vocab.encode_program(*start);
        const std::vector<int> y = model.sample_completion(x, prefix, temperature, max_new, rng);
        SampledProgram s;
        s.start_lines = start->size();
        s.text = vocab.decode_program(y);
        if (auto p = try_parse(s.text)) s.program = std::move(*p);
        out.push_back(std::move(s));
    }
    return out;
}

double lr_at(const TrainConfig& cfg, int64_t step) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
        return cfg.lr * static_cast<double>(step + 1) / cfg.warmup_steps;
    }
    const int64_t decay_span = std::max<int64_t>(1, cfg.steps - cfg.warmup_steps);
    return cfg.lr * static_cast<double>(cfg.steps - step) / static_cast<double>(decay_span);
}

UpdateStats training_update(TrainState& state, const std::vector<Task>& tasks,
                            const std::vector<size_t>& batch) {
    const TrainConfig& cfg = state.cfg;
    if (batch.empty()) throw InvalidArguments("empty batch");

    struct Slot {
        std::vector<double> grad;
        double loss = 0.0;
        int sampled = 0, unparseable = 0, fcp = 0, pcp = 0;
    };
    std::vector<Slot> slots(batch.size());

    parallel_for(batch.size(), cfg.threads, [&](size_t bi) {
        const Task& task = tasks.at(batch[bi]);
        ProgramBuffer& buffer = state.buffers.at(task.id);
        Slot& slot = slots[bi];

        if (cfg.mode != TrainMode::MleOnly) {
            Rng rng(derive_stream(cfg.seed, static_cast<uint64_t>(batch[bi]),
                                  static_cast<uint64_t>(state.step)));
            const auto samples =
                sample_programs(state.model, state.vocab, task, buffer,
                                cfg.samples_per_task_per_batch, cfg.sample_temperature,
                                cfg.max_new_tokens, rng);
            for (const SampledProgram& s : samples) {
                ++slot.sampled;
                if (!s.program) {
                    ++slot.unparseable;
                    continue;
                }
                const Classification c = buffer.classify(*s.program);
                if (c.kind == Classification::Kind::FullyCorrect) {
                    if (buffer.try_insert(*s.program, CandidateKind::Fcp) ==
                        InsertOutcome::Inserted) {
                        ++slot.fcp;
                    }
                } else if (c.kind == Classification::Kind::PartialPrefix &&
                           cfg.mode == TrainMode::FcpPlusPcp) {
                    if (buffer.try_insert(prefix(*s.program, c.prefix_len), CandidateKind::Pcp) ==
                        InsertOutcome::Inserted) {
                        ++slot.pcp;
                    }
                }
            }
        }

        std::vector<Target> targets;
        if (cfg.mode == TrainMode::MleOnly) {
            targets.push_back({state.vocab.encode_program(task.gold), true});
        } else {
            for (const auto& [prog, complete] : buffer.training_targets()) {
                targets.push_back({state.vocab.encode_program(*prog), complete});
            }
        }
        LossResult res = loss_and_grad(cfg.loss, state.model, state.x_cache.at(task.id), targets);
        slot.loss = res.loss;
        slot.grad = std::move(res.grad);
    });

    // deterministic reduction in task order
    const size_t np = state.model.param_count();
    std::vector<double> grad(np, 0.0);
    UpdateStats stats;
    for (const Slot& s : slots) {
        for (size_t j = 0; j < np; ++j) grad[j] += s.grad[j];
        stats.mean_loss += s.loss;
        stats.sampled += s.sampled;
        stats.unparseable += s.unparseable;
        stats.inserted_fcp += s.fcp;
        stats.inserted_pcp += s.pcp;
    }
    const auto bn = static_cast<double>(batch.size());
    for (size_t j = 0; j < np; ++j) grad[j] /= bn;
    stats.mean_loss /= bn;

    double sq = 0.0;
    for (size_t j = 0; j < np; ++j) sq += grad[j] * grad[j];
    stats.grad_norm = std::sqrt(sq);
    if (stats.grad_norm > cfg.grad_clip) {
        const double scale = cfg.grad_clip / stats.grad_norm;
        for (size_t j = 0; j < np; ++j) grad[j] *= scale;
        stats.grad_norm_post = cfg.grad_clip;
    } else {
        stats.grad_norm_post = stats.grad_norm;
    }

    const double lr = lr_at(cfg, state.step);
    AdamState& opt = state.opt;
    opt.t += 1;
    const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
    const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
    std::vector<double>& p = state.model.params();
    for (size_t j = 0; j < np; ++j) {
        opt.m[j] = cfg.beta1 * opt.m[j] + (1.0 - cfg.beta1) * grad[j];
        opt.v[j] = cfg.beta2 * opt.v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
        const double mhat = opt.m[j] / corr1;
        const double vhat = opt.v[j] / corr2;
        p[j] -= lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * p[j]);
    }
    state.step += 1;
    return stats;
}

namespace {

struct BufferAverages {
    double fcp = 0.0;
    double pcp = 0.0;
};

BufferAverages buffer_averages(const TrainState& state) {
    BufferAverages avg;
    if (state.buffers.empty()) return avg;
    for (const auto& [id, buf] : state.buffers) {
        avg.fcp += buf.fcp_count();
        avg.pcp += buf.pcp_count();
    }
    avg.fcp /= static_cast<double>(state.buffers.size());
    avg.pcp /= static_cast<double>(state.buffers.size());
    return avg;
}

Checkpoint snapshot(const TrainState& state) {
    Checkpoint ck;
    ck.config = state.model.config();
    ck.vocab_tokens = state.vocab.tokens();
    ck.params = state.model.params();
    ck.has_optimizer = true;
    ck.optimizer = state.opt;
    ck.step = state.step;
    return ck;
}

}  // namespace

TrainArtifacts train(const TrainConfig& cfg, const std::vector<Task>& train_tasks,
                     const std::vector<Task>& dev_tasks, const std::string& out_dir) {
    if (dev_tasks.empty()) throw InvalidArguments("dev set is empty");
    std::filesystem::create_directories(out_dir);

    TrainState state = init_train_state(cfg, train_tasks, dev_tasks);

    TrainArtifacts art;
    art.metrics_path = out_dir + "/metrics.jsonl";
    art.best_checkpoint_path = out_dir + "/best.ckpt";
    art.final_checkpoint_path = out_dir + "/final.ckpt";
    art.buffer_dump_path = out_dir + "/buffers.jsonl";

    std::ofstream metrics(art.metrics_path);
    if (!metrics) throw IoError("cannot open metrics log for writing: " + art.metrics_path);

    EvalConfig ec;
    ec.k_list = {1};
    for (int k : cfg.eval_k) {
        if (k != 1) ec.k_list.push_back(k);
    }
    ec.n = cfg.eval_n;
    ec.t_low = cfg.eval_t_low;
    ec.t_high = cfg.eval_t_high;
    ec.max_new = cfg.max_new_tokens;
    ec.threads = cfg.threads;

    double best_pass1 = -1.0;
    int64_t best_step = 0;
    uint64_t record_idx = 0;
    double window_loss = 0.0;
    int window_updates = 0;

    auto emit_record = [&]() {
        const uint64_t eval_seed = derive_stream(cfg.seed, kEvalSalt, record_idx);
        const EvalReport rep = evaluate(state.model, state.vocab, dev_tasks, ec, eval_seed);
        const BufferAverages avg = buffer_averages(state);
        json line;
        line["step"] = state.step;
        line["eval_seed"] = eval_seed;
        line["pass@1"] = rep.pass_at.at(1);
        json pk(json::value_t::object);
        for (int k : cfg.eval_k) {
            if (k != 1) pk[std::to_string(k)] = rep.pass_at.at(k);
        }
        line["pass@k"] = pk;
        line["avg_fcp"] = avg.fcp;
        line["avg_pcp"] = avg.pcp;
        line["unique_ratio"] = rep.unique_ratio;
        if (window_updates > 0) {
            line["train_loss"] = window_loss / window_updates;
        } else {
            line["train_loss"] = nullptr;
        }
        metrics << line.dump() << '\n';
        metrics.flush();
        if (!metrics) throw IoError("failed writing metrics log: " + art.metrics_path);

        if (rep.pass_at.at(1) > best_pass1) {
            best_pass1 = rep.pass_at.at(1);
            best_step = state.step;
            save_checkpoint(art.best_checkpoint_path, snapshot(state));
        }
        ++record_idx;
        window_loss = 0.0;
        window_updates = 0;
    };

    emit_record();  // step 0, initial parameters

    std::vector<size_t> order(train_tasks.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size();
    uint64_t epoch = 0;

    while (state.step < cfg.steps) {
        if (cursor >= order.size()) {
            Rng erng(derive_stream(cfg.seed, kEpochSalt, epoch++));
            erng.shuffle(order);
            cursor = 0;
        }
        const size_t take = std::min<size_t>(cfg.batch_size, order.size() - cursor);
        const std::vector<size_t> batch(order.begin() + static_cast<long>(cursor),
                                        order.begin() + static_cast<long>(cursor + take));
        cursor += take;

        const UpdateStats stats = training_update(state, train_tasks, batch);
        window_loss += stats.mean_loss;
        window_updates += 1;

        if (state.step % cfg.eval_every == 0) emit_record();
    }

    save_checkpoint(art.final_checkpoint_path, snapshot(state));

    std::ofstream dump(art.buffer_dump_path);
    if (!dump) throw IoError("cannot open buffer dump for writing: " + art.buffer_dump_path);
    for (const Task& t : train_tasks) {
        const ProgramBuffer& buf = state.buffers.at(t.id);
        json entries = json::array();
        for (const BufferEntry* e : buf.entries()) {
            entries.push_back({{"program", pretty_print(e->program)},
                               {"kind", entry_kind_name(e->kind)},
                               {"lines", e->line_count}});
        }
        json line;
        line["task_id"] = t.id;
        line["gold"] = pretty_print(t.gold);
        line["entries"] = entries;
        dump << line.dump() << '\n';
    }
    if (!dump) throw IoError("failed writing buffer dump: " + art.buffer_dump_path);

    const BufferAverages avg = buffer_averages(state);
    art.best_pass1 = best_pass1;
    art.best_step = best_step;
    art.final_avg_fcp = avg.fcp;
    art.final_avg_pcp = avg.pcp;
    return art;
}

}  // namespace selfsynth
