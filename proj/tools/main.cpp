// Operator entry point. Everything goes through the C interface; the core
// library is never linked directly. Exit codes: 0 ok, 1 module error,
// 2 usage error.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <selfsynth.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
    std::string out = s == nullptr ? "" : s;
    ss_free(s);
    return out;
}

int module_error(ss_status st) {
    std::cerr << "error (" << ss_status_name(st) << "): " << ss_last_error() << '\n';
    return 1;
}

int diagnostic(const std::string& msg) {
    std::cerr << "error: " << msg << '\n';
    return 1;
}

// SELFSYNTH_OUT picks the output directory when --out is omitted.
std::string default_out_dir() {
    const char* env = std::getenv("SELFSYNTH_OUT");
    return (env != nullptr && *env != '\0') ? env : ".";
}

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// dev.jsonl inside a directory, the file itself otherwise
std::string tasks_path(const std::string& data) {
    return fs::is_directory(data) ? (fs::path(data) / "dev.jsonl").string() : data;
}

void print_config(const json& resolved) { std::cout << "config " << resolved.dump() << '\n'; }

std::string one_line(const std::string& program) {
    std::string out;
    for (char c : program) {
        if (c == '\n') {
            out += " ; ";
        } else {
            out += c;
        }
    }
    return out;
}

struct GenDataArgs {
    uint64_t seed = 0;
    int n_tasks = 250;
    int templates = 0;  // 0 = all
    int max_lines = 6;
    double dev_fraction = 0.2;
    uint64_t split_seed = 0;
    bool split_seed_set = false;
    std::string out_dir;
};

int run_gen_data(const GenDataArgs& a) {
    const std::string out_dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
    const uint64_t split_seed = a.split_seed_set ? a.split_seed : a.seed;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) return diagnostic("cannot create output directory " + out_dir);
    const std::string train = (fs::path(out_dir) / "train.jsonl").string();
    const std::string dev = (fs::path(out_dir) / "dev.jsonl").string();
    print_config(json{{"command", "gen-data"},
                      {"seed", a.seed},
                      {"n_tasks", a.n_tasks},
                      {"templates", a.templates},
                      {"max_lines", a.max_lines},
                      {"dev_fraction", a.dev_fraction},
                      {"split_seed", split_seed},
                      {"train", train},
                      {"dev", dev}});
    char* summary = nullptr;
    const ss_status st = ss_gen_data(a.seed, a.n_tasks, a.max_lines, a.templates, a.dev_fraction,
                                     split_seed, train.c_str(), dev.c_str(), &summary);
    if (st != SS_OK) return module_error(st);
    std::cout << take(summary) << '\n';
    return 0;
}

struct TrainArgs {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    int threads = 0;  // 0 = honor the config file
};

int run_train(const TrainArgs& a) {
    const std::string out_dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
    auto config_text = read_file(a.config_path);
    if (!config_text) return diagnostic("cannot read config file " + a.config_path);
    if (a.threads > 0) {
        json cfg;
        try {
            cfg = json::parse(*config_text);
        } catch (const json::exception& e) {
            return diagnostic("config file " + a.config_path + ": " + e.what());
        }
        cfg["threads"] = a.threads;
        config_text = cfg.dump();
    }
    char* resolved = nullptr;
    ss_status st = ss_resolve_train_config(config_text->c_str(), &resolved);
    if (st != SS_OK) return module_error(st);
    json shown = json::parse(take(resolved));
    shown["command"] = "train";
    shown["data"] = a.data_dir;
    shown["out"] = out_dir;
    print_config(shown);

    const std::string train = (fs::path(a.data_dir) / "train.jsonl").string();
    const std::string dev = (fs::path(a.data_dir) / "dev.jsonl").string();
    char* artifacts = nullptr;
    st = ss_train(config_text->c_str(), train.c_str(), dev.c_str(), out_dir.c_str(), &artifacts);
    if (st != SS_OK) return module_error(st);
    std::cout << take(artifacts) << '\n';
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    int n = 20;
    std::vector<int> k = {1, 5, 10};
    double t_low = 0.2;
    double t_high = 0.8;
    int max_new = 96;
    int threads = 1;
    uint64_t seed = 0;
    std::string out_path;
    std::string dump_path;
};

int run_eval(const EvalArgs& a) {
    const std::string tasks = tasks_path(a.data);
    const std::string out_path =
        a.out_path.empty() ? (fs::path(default_out_dir()) / "report.json").string() : a.out_path;
    print_config(json{{"command", "eval"},
                      {"checkpoint", a.checkpoint},
                      {"data", tasks},
                      {"n", a.n},
                      {"k", a.k},
                      {"t_low", a.t_low},
                      {"t_high", a.t_high},
                      {"max_new", a.max_new},
                      {"threads", a.threads},
                      {"seed", a.seed},
                      {"out", out_path},
                      {"dump", a.dump_path}});
    char* report = nullptr;
    const ss_status st =
        ss_eval(a.checkpoint.c_str(), tasks.c_str(), a.n, a.k.data(),
                static_cast<int>(a.k.size()), a.t_low, a.t_high, a.max_new, a.threads, a.seed,
                a.dump_path.empty() ? nullptr : a.dump_path.c_str(), &report);
    if (st != SS_OK) return module_error(st);
    const std::string text = take(report);
    std::ofstream out(out_path);
    if (!out) return diagnostic("cannot write report to " + out_path);
    out << text << '\n';
    std::cout << text << '\n';
    return 0;
}

struct SampleArgs {
    std::string checkpoint;
    std::string data;
    std::string task_id;
    int n = 5;
    double temperature = 0.8;
    int max_new = 96;
    uint64_t seed = 0;
};

int run_sample(const SampleArgs& a) {
    const std::string tasks = tasks_path(a.data);
    print_config(json{{"command", "sample"},
                      {"checkpoint", a.checkpoint},
                      {"data", tasks},
                      {"task_id", a.task_id},
                      {"n", a.n},
                      {"temperature", a.temperature},
                      {"max_new", a.max_new},
                      {"seed", a.seed}});
    char* task_text = nullptr;
    ss_status st = ss_load_task(tasks.c_str(), a.task_id.c_str(), &task_text);
    if (st != SS_OK) return module_error(st);
    const json task = json::parse(take(task_text));

    ss_model* model = nullptr;
    st = ss_model_open(a.checkpoint.c_str(), &model);
    if (st != SS_OK) return module_error(st);
    char* samples_text = nullptr;
    st = ss_model_sample(model, task["nl"].get<std::string>().c_str(), a.n, a.temperature,
                         a.max_new, a.seed, 1, task["gold_result"].get<double>(), &samples_text);
    ss_model_close(model);
    if (st != SS_OK) return module_error(st);

    std::cout << "task " << task["id"].get<std::string>() << ": "
              << task["nl"].get<std::string>() << '\n';
    std::cout << "gold result " << task["gold_result"].get<double>() << '\n';
    const json samples = json::parse(take(samples_text));
    int idx = 0;
    for (const auto& s : samples) {
        ++idx;
        const char* mark = !s["parseable"].get<bool>()           ? "unparseable"
                           : s["correct"].get<bool>()            ? "correct"
                                                                 : "wrong";
        std::cout << "sample " << idx << " [" << mark << "]";
        if (!s["answer"].is_null()) std::cout << " answer=" << s["answer"].get<double>();
        std::cout << '\n';
        std::cout << "  " << one_line(s["text"].get<std::string>()) << '\n';
    }
    return 0;
}

int run_trace(const std::string& program_path) {
    print_config(json{{"command", "trace"}, {"program", program_path}});
    const auto text = read_file(program_path);
    if (!text) return diagnostic("cannot read program file " + program_path);
    char* out = nullptr;
    const ss_status st = ss_trace(text->c_str(), &out);
    if (st != SS_OK) return module_error(st);
    const json traced = json::parse(take(out));
    for (const auto& s : traced["states"]) {
        std::cout << "{" << s["state"].get<std::string>() << "}" << '\n';
    }
    if (traced["status"].get<std::string>() != "ok") {
        std::cout << "error at line " << traced["failed_at"].get<int>() << ": "
                  << traced["status"].get<std::string>() << '\n';
    }
    return 0;
}

int run_inspect(const std::string& dump_path, const std::string& task_id) {
    print_config(json{{"command", "inspect-buffer"},
                      {"dump", dump_path},
                      {"task_id", task_id.empty() ? json(nullptr) : json(task_id)}});
    char* out = nullptr;
    const ss_status st =
        ss_inspect_buffer(dump_path.c_str(), task_id.empty() ? nullptr : task_id.c_str(), &out);
    if (st != SS_OK) return module_error(st);
    const json records = json::parse(take(out));
    for (const auto& rec : records) {
        std::cout << "task " << rec["task_id"].get<std::string>() << " ("
                  << rec["entries"].size() << " entries)\n";
        for (const auto& e : rec["entries"]) {
            std::cout << "  " << e["kind"].get<std::string>() << "  " << e["lines"].get<int>()
                      << "  " << one_line(e["program"].get<std::string>()) << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-sampling trainer for straight-line arithmetic program synthesis"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* cmd_gen = app.add_subcommand("gen-data", "generate a synthetic task corpus");
    cmd_gen->add_option("--seed", gen.seed, "corpus seed");
    cmd_gen->add_option("--n-tasks", gen.n_tasks, "number of tasks");
    cmd_gen->add_option("--templates", gen.templates, "template count (0 = all)");
    cmd_gen->add_option("--max-lines", gen.max_lines, "max gold program lines");
    cmd_gen->add_option("--dev-fraction", gen.dev_fraction, "fraction of templates held out");
    auto* split_opt = cmd_gen->add_option("--split-seed", gen.split_seed,
                                          "split shuffle seed (default: --seed)");
    cmd_gen->add_option("--out", gen.out_dir, "output directory ($SELFSYNTH_OUT)");

    TrainArgs tr;
    auto* cmd_train = app.add_subcommand("train", "run the self-sampling training loop");
    cmd_train->add_option("--config", tr.config_path, "training config JSON")->required();
    cmd_train->add_option("--data", tr.data_dir, "directory with train.jsonl/dev.jsonl")
        ->required();
    cmd_train->add_option("--out", tr.out_dir, "output directory ($SELFSYNTH_OUT)");
    cmd_train->add_option("--threads", tr.threads, "worker cap (overrides config)");

    EvalArgs ev;
    auto* cmd_eval = app.add_subcommand("eval", "pass@k evaluation of a checkpoint");
    cmd_eval->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
    cmd_eval->add_option("--data", ev.data, "task JSONL file (or directory with dev.jsonl)")
        ->required();
    cmd_eval->add_option("--n", ev.n, "high-temperature samples per task");
    cmd_eval->add_option("--k", ev.k, "k values")->delimiter(',');
    cmd_eval->add_option("--t-low", ev.t_low, "pass@1 temperature");
    cmd_eval->add_option("--t-high", ev.t_high, "multi-sample temperature");
    cmd_eval->add_option("--max-new", ev.max_new, "generation budget per sample");
    cmd_eval->add_option("--threads", ev.threads, "worker cap");
    cmd_eval->add_option("--seed", ev.seed, "evaluation seed");
    cmd_eval->add_option("--out", ev.out_path, "report path (default $SELFSYNTH_OUT/report.json)");
    cmd_eval->add_option("--dump", ev.dump_path, "per-task sample dump JSONL");

    SampleArgs sa;
    auto* cmd_sample = app.add_subcommand("sample", "draw programs for one task");
    cmd_sample->add_option("--checkpoint", sa.checkpoint, "checkpoint path")->required();
    cmd_sample->add_option("--data", sa.data, "task JSONL file (or directory with dev.jsonl)")
        ->required();
    cmd_sample->add_option("--task-id", sa.task_id, "task id")->required();
    cmd_sample->add_option("--n", sa.n, "number of samples");
    cmd_sample->add_option("--temperature", sa.temperature, "sampling temperature");
    cmd_sample->add_option("--max-new", sa.max_new, "generation budget per sample");
    cmd_sample->add_option("--seed", sa.seed, "sampling seed");

    std::string trace_path;
    auto* cmd_trace = app.add_subcommand("trace", "print per-prefix execution states");
    cmd_trace->add_option("--program", trace_path, "program file")->required();

    std::string dump_path;
    std::string dump_task;
    auto* cmd_inspect = app.add_subcommand("inspect-buffer", "print buffer dump entries");
    cmd_inspect->add_option("--dump", dump_path, "buffers.jsonl path")->required();
    cmd_inspect->add_option("--task-id", dump_task, "only this task");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    gen.split_seed_set = split_opt->count() > 0;
    if (cmd_gen->parsed()) return run_gen_data(gen);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_eval->parsed()) return run_eval(ev);
    if (cmd_sample->parsed()) return run_sample(sa);
    if (cmd_trace->parsed()) return run_trace(trace_path);
    if (cmd_inspect->parsed()) return run_inspect(dump_path, dump_task);
    return 2;
}
