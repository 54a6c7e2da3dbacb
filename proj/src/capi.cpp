#include "selfsynth.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "data.hpp"
#include "dsl.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "exec.hpp"
#include "rng.hpp"
#include "trainer.hpp"
#include "vocab.hpp"

using nlohmann::json;

namespace {

thread_local std::string tl_error;

ss_status fail(ss_status code, const std::string& what) {
    tl_error = what;
    return code;
}

// All entry points funnel through here so the exception->status mapping
// lives in one place.
template <class Fn>
ss_status guarded(Fn&& fn) {
    tl_error.clear();
    try {
        fn();
        return SS_OK;
    } catch (const selfsynth::SyntaxError& e) {
        return fail(SS_ERR_SYNTAX, e.what());
    } catch (const selfsynth::UnsupportedConstruct& e) {
        return fail(SS_ERR_UNSUPPORTED, e.what());
    } catch (const selfsynth::ContextOverflow& e) {
        return fail(SS_ERR_CONTEXT_OVERFLOW, e.what());
    } catch (const selfsynth::MalformedRecord& e) {
        return fail(SS_ERR_MALFORMED, e.what());
    } catch (const selfsynth::GoldExecutionFailure& e) {
        return fail(SS_ERR_GOLD_EXECUTION, e.what());
    } catch (const selfsynth::InvalidArguments& e) {
        return fail(SS_ERR_INVALID_ARGUMENTS, e.what());
    } catch (const selfsynth::EmptyTargets& e) {
        return fail(SS_ERR_EMPTY_TARGETS, e.what());
    } catch (const selfsynth::BetaOutOfRange& e) {
        return fail(SS_ERR_BETA_RANGE, e.what());
    } catch (const selfsynth::TooFewTemplates& e) {
        return fail(SS_ERR_TOO_FEW_TEMPLATES, e.what());
    } catch (const selfsynth::IoError& e) {
        return fail(SS_ERR_IO, e.what());
    } catch (const selfsynth::Error& e) {
        return fail(SS_ERR_UNKNOWN, e.what());
    } catch (const std::exception& e) {
        return fail(SS_ERR_UNKNOWN, e.what());
    } catch (...) {
        return fail(SS_ERR_UNKNOWN, "unknown error");
    }
}

void set_out(char** out, const std::string& s) {
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (buf == nullptr) throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out = buf;
}

void require(bool cond, const char* msg) {
    if (!cond) throw selfsynth::InvalidArguments(msg);
}

int distinct_templates(const std::vector<selfsynth::Task>& tasks) {
    std::set<std::string> ids;
    for (const auto& t : tasks) ids.insert(t.template_id);
    return static_cast<int>(ids.size());
}

json task_to_json(const selfsynth::Task& t) {
    std::string nl;
    for (size_t i = 0; i < t.nl.size(); ++i) {
        if (i > 0) nl += ' ';
        nl += t.nl[i];
    }
    return json{{"id", t.id},
                {"template_id", t.template_id},
                {"nl", nl},
                {"program", selfsynth::pretty_print(t.gold)},
                {"gold_result", t.gold_result}};
}

}  // namespace

struct ss_model {
    selfsynth::Model model;
    selfsynth::Vocabulary vocab;
    int64_t step = 0;

    explicit ss_model(const selfsynth::Checkpoint& ck)
        : model(ck.make_model()), vocab(ck.make_vocabulary()), step(ck.step) {}
};

extern "C" {

const char* ss_status_name(ss_status s) {
    switch (s) {
        case SS_OK: return "ok";
        case SS_ERR_SYNTAX: return "syntax_error";
        case SS_ERR_UNSUPPORTED: return "unsupported_construct";
        case SS_ERR_CONTEXT_OVERFLOW: return "context_overflow";
        case SS_ERR_MALFORMED: return "malformed_record";
        case SS_ERR_GOLD_EXECUTION: return "gold_execution_failure";
        case SS_ERR_INVALID_ARGUMENTS: return "invalid_arguments";
        case SS_ERR_EMPTY_TARGETS: return "empty_targets";
        case SS_ERR_BETA_RANGE: return "beta_out_of_range";
        case SS_ERR_TOO_FEW_TEMPLATES: return "too_few_templates";
        case SS_ERR_IO: return "io_error";
        case SS_ERR_UNKNOWN: return "unknown_error";
    }
    return "unknown_error";
}

const char* ss_last_error(void) { return tl_error.c_str(); }

void ss_free(char* s) { std::free(s); }

ss_status ss_gen_data(uint64_t seed, int n_tasks, int max_lines, int n_templates,
                      double dev_fraction, uint64_t split_seed, const char* train_path,
                      const char* dev_path, char** summary_json_out) {
    return guarded([&] {
        require(train_path != nullptr && dev_path != nullptr, "output paths must not be null");
        require(summary_json_out != nullptr, "summary output must not be null");
        const auto tasks = selfsynth::synth_generate(seed, n_tasks, max_lines, n_templates);
        const auto [train, dev] = selfsynth::split_by_template(tasks, dev_fraction, split_seed);
        selfsynth::save_jsonl(train_path, train);
        selfsynth::save_jsonl(dev_path, dev);
        const json summary{{"n_train", train.size()},
                           {"n_dev", dev.size()},
                           {"templates_train", distinct_templates(train)},
                           {"templates_dev", distinct_templates(dev)}};
        set_out(summary_json_out, summary.dump(2));
    });
}

ss_status ss_resolve_train_config(const char* config_json, char** resolved_json_out) {
    return guarded([&] {
        require(config_json != nullptr, "config text must not be null");
        require(resolved_json_out != nullptr, "resolved output must not be null");
        const auto cfg = selfsynth::TrainConfig::from_json(config_json);
        cfg.validate();
        set_out(resolved_json_out, cfg.to_json());
    });
}

ss_status ss_train(const char* config_json, const char* train_path, const char* dev_path,
                   const char* out_dir, char** artifacts_json_out) {
    return guarded([&] {
        require(config_json != nullptr, "config text must not be null");
        require(train_path != nullptr && dev_path != nullptr, "data paths must not be null");
        require(out_dir != nullptr, "output directory must not be null");
        require(artifacts_json_out != nullptr, "artifacts output must not be null");
        const auto cfg = selfsynth::TrainConfig::from_json(config_json);
        const auto train_tasks = selfsynth::load_jsonl(train_path);
        const auto dev_tasks = selfsynth::load_jsonl(dev_path);
        const auto art = selfsynth::train(cfg, train_tasks, dev_tasks, out_dir);
        const json out{{"metrics_path", art.metrics_path},
                       {"best_checkpoint_path", art.best_checkpoint_path},
                       {"final_checkpoint_path", art.final_checkpoint_path},
                       {"buffer_dump_path", art.buffer_dump_path},
                       {"best_pass1", art.best_pass1},
                       {"best_step", art.best_step},
                       {"final_avg_fcp", art.final_avg_fcp},
                       {"final_avg_pcp", art.final_avg_pcp}};
        set_out(artifacts_json_out, out.dump(2));
    });
}

ss_status ss_eval(const char* checkpoint_path, const char* tasks_path, int n, const int* k_list,
                  int k_count, double t_low, double t_high, int max_new, int threads,
                  uint64_t seed, const char* sample_dump_path, char** report_json_out) {
    return guarded([&] {
        require(checkpoint_path != nullptr && tasks_path != nullptr, "paths must not be null");
        require(k_list != nullptr && k_count > 0, "k list must be nonempty");
        require(report_json_out != nullptr, "report output must not be null");
        const auto ck = selfsynth::load_checkpoint(checkpoint_path);
        const auto model = ck.make_model();
        const auto vocab = ck.make_vocabulary();
        const auto tasks = selfsynth::load_jsonl(tasks_path);
        selfsynth::EvalConfig ec;
        ec.k_list.assign(k_list, k_list + k_count);
        ec.n = n;
        ec.t_low = t_low;
        ec.t_high = t_high;
        ec.max_new = max_new;
        ec.threads = threads;
        if (sample_dump_path != nullptr) ec.sample_dump_path = sample_dump_path;
        const auto report = selfsynth::evaluate(model, vocab, tasks, ec, seed);
        set_out(report_json_out, report.to_json());
    });
}

ss_status ss_trace(const char* program_text, char** trace_json_out) {
    return guarded([&] {
        require(program_text != nullptr, "program text must not be null");
        require(trace_json_out != nullptr, "trace output must not be null");
        const auto program = selfsynth::parse(program_text);
        const auto traced = selfsynth::trace_all(program);
        json states = json::array();
        for (size_t i = 0; i < traced.states.size(); ++i) {
            states.push_back(json{{"line", i + 1}, {"state", traced.states[i].key}});
        }
        json out{{"status", traced.ok() ? "ok" : selfsynth::exec_status_name(traced.status)},
                 {"failed_at", nullptr},
                 {"states", std::move(states)}};
        if (!traced.ok()) out["failed_at"] = traced.failed_at;
        set_out(trace_json_out, out.dump(2));
    });
}

ss_status ss_inspect_buffer(const char* dump_path, const char* task_id,
                            char** entries_json_out) {
    return guarded([&] {
        require(dump_path != nullptr, "dump path must not be null");
        require(entries_json_out != nullptr, "entries output must not be null");
        std::ifstream in(dump_path);
        if (!in) throw selfsynth::IoError(std::string("cannot open ") + dump_path);
        json records = json::array();
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json rec;
            try {
                rec = json::parse(line);
            } catch (const json::exception& e) {
                throw selfsynth::MalformedRecord("line " + std::to_string(line_no) + ": " +
                                                 e.what());
            }
            if (!rec.is_object() || !rec.contains("task_id") || !rec["task_id"].is_string()) {
                throw selfsynth::MalformedRecord("line " + std::to_string(line_no) +
                                                 ": expected an object with a task_id");
            }
            if (task_id == nullptr || rec["task_id"].get<std::string>() == task_id) {
                records.push_back(std::move(rec));
            }
        }
        if (task_id != nullptr && records.empty()) {
            throw selfsynth::InvalidArguments(std::string("task id not found in dump: ") +
                                              task_id);
        }
        set_out(entries_json_out, records.dump(2));
    });
}

ss_status ss_load_task(const char* tasks_path, const char* task_id, char** task_json_out) {
    return guarded([&] {
        require(tasks_path != nullptr && task_id != nullptr, "path and task id must not be null");
        require(task_json_out != nullptr, "task output must not be null");
        const auto tasks = selfsynth::load_jsonl(tasks_path);
        for (const auto& t : tasks) {
            if (t.id == task_id) {
                set_out(task_json_out, task_to_json(t).dump(2));
                return;
            }
        }
        throw selfsynth::InvalidArguments(std::string("task id not found: ") + task_id);
    });
}

ss_status ss_model_open(const char* checkpoint_path, ss_model** out) {
    return guarded([&] {
        require(checkpoint_path != nullptr, "checkpoint path must not be null");
        require(out != nullptr, "handle output must not be null");
        const auto ck = selfsynth::load_checkpoint(checkpoint_path);
        *out = new ss_model(ck);
    });
}

void ss_model_close(ss_model* m) { delete m; }

ss_status ss_model_info(const ss_model* m, char** info_json_out) {
    return guarded([&] {
        require(m != nullptr, "model handle must not be null");
        require(info_json_out != nullptr, "info output must not be null");
        const auto& cfg = m->model.config();
        const json out{{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model},
                       {"n_heads", cfg.n_heads},       {"n_layers", cfg.n_layers},
                       {"d_ff", cfg.d_ff},             {"context", cfg.context},
                       {"step", m->step},              {"params", m->model.param_count()}};
        set_out(info_json_out, out.dump(2));
    });
}

ss_status ss_model_sample(const ss_model* m, const char* nl_text, int n, double temperature,
                          int max_new, uint64_t seed, int has_gold, double gold_result,
                          char** samples_json_out) {
    return guarded([&] {
        require(m != nullptr, "model handle must not be null");
        require(nl_text != nullptr, "specification text must not be null");
        require(samples_json_out != nullptr, "samples output must not be null");
        require(n > 0, "sample count must be positive");
        const auto x = m->vocab.encode_words(selfsynth::split_words(nl_text));
        json samples = json::array();
        for (int d = 0; d < n; ++d) {
            selfsynth::Rng rng(selfsynth::derive_stream(seed, 0, static_cast<uint64_t>(d)));
            const auto tokens =
                m->model.sample_completion(x, std::span<const int>{}, temperature, max_new, rng);
            const auto text = m->vocab.decode_program(tokens);
            json rec{{"text", text}, {"parseable", false}, {"correct", nullptr},
                     {"answer", nullptr}};
            if (const auto program = selfsynth::try_parse(text)) {
                rec["parseable"] = true;
                const auto res = selfsynth::execute(*program);
                if (res.ok()) rec["answer"] = res.answer;
                if (has_gold != 0) {
                    rec["correct"] = res.ok() && selfsynth::is_correct(res.answer, gold_result);
                }
            } else if (has_gold != 0) {
                rec["correct"] = false;
            }
            samples.push_back(std::move(rec));
        }
        set_out(samples_json_out, samples.dump(2));
    });
}

}  // extern "C"
