#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "exec.hpp"

namespace selfsynth {

struct Task {
    std::string id;
    std::string template_id;
    std::vector<std::string> nl;  // word-level specification tokens
    Program gold;
    double gold_result = 0.0;
};

// One JSON object per line: {"id", "nl", "program", optional "template_id"}.
// nl is a single space-joined string. template_id defaults to id.
std::vector<Task> load_jsonl(const std::string& path);  // IoError, MalformedRecord, GoldExecutionFailure
void save_jsonl(const std::string& path, const std::vector<Task>& tasks);  // IoError

// Templated word problems over a small shared vocabulary, with matching
// straight-line gold programs (n0.., t0.., final answer=). Templates are
// assigned round-robin; per-task constants come from streams derived from
// seed, so the corpus is a pure function of the arguments. Templates whose
// programs exceed max_lines are excluded; n_templates of the remainder are
// used (0 = all).
std::vector<Task> synth_generate(uint64_t seed, int n_tasks, int max_lines, int n_templates);

int template_library_size();

// Splits by template identity so no template appears on both sides.
std::pair<std::vector<Task>, std::vector<Task>> split_by_template(const std::vector<Task>& tasks,
                                                                  double dev_fraction,
                                                                  uint64_t seed);

}  // namespace selfsynth
