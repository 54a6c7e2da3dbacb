#ifndef SELFSYNTH_H
#define SELFSYNTH_H

/* C interface to the self-sampling program-synthesis trainer. All string
 * outputs are malloc'd, NUL-terminated, and owned by the caller (ss_free).
 * Functions return SS_OK on success; on failure ss_last_error() holds a
 * message for the calling thread until its next API call. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ss_status {
    SS_OK = 0,
    SS_ERR_SYNTAX = 1,
    SS_ERR_UNSUPPORTED = 2,
    SS_ERR_CONTEXT_OVERFLOW = 3,
    SS_ERR_MALFORMED = 4,
    SS_ERR_GOLD_EXECUTION = 5,
    SS_ERR_INVALID_ARGUMENTS = 6,
    SS_ERR_EMPTY_TARGETS = 7,
    SS_ERR_BETA_RANGE = 8,
    SS_ERR_TOO_FEW_TEMPLATES = 9,
    SS_ERR_IO = 10,
    SS_ERR_UNKNOWN = 11
} ss_status;

const char* ss_status_name(ss_status s);
const char* ss_last_error(void);
void ss_free(char* s);

/* Generates a synthetic corpus, splits it by template, writes two JSONL
 * files, and reports counts as JSON:
 * {"n_train","n_dev","templates_train","templates_dev"}. */
ss_status ss_gen_data(uint64_t seed, int n_tasks, int max_lines, int n_templates,
                      double dev_fraction, uint64_t split_seed, const char* train_path,
                      const char* dev_path, char** summary_json_out);

/* Parses a training config (JSON text), applies defaults, validates, and
 * returns the fully resolved config as JSON. */
ss_status ss_resolve_train_config(const char* config_json, char** resolved_json_out);

/* Runs the full training loop; artifacts JSON:
 * {"metrics_path","best_checkpoint_path","final_checkpoint_path",
 *  "buffer_dump_path","best_pass1","best_step","final_avg_fcp",
 *  "final_avg_pcp"}. */
ss_status ss_train(const char* config_json, const char* train_path, const char* dev_path,
                   const char* out_dir, char** artifacts_json_out);

/* pass@k evaluation of a checkpoint over a task file. k_list points at
 * k_count entries. sample_dump_path may be NULL. */
ss_status ss_eval(const char* checkpoint_path, const char* tasks_path, int n, const int* k_list,
                  int k_count, double t_low, double t_high, int max_new, int threads,
                  uint64_t seed, const char* sample_dump_path, char** report_json_out);

/* Execution-state trace of a program text:
 * {"status":"ok"|<error>,"failed_at":int|null,
 *  "states":[{"line":1,"state":"1"},...]}. */
ss_status ss_trace(const char* program_text, char** trace_json_out);

/* Reads a buffer dump (JSONL) and returns the matching records as a JSON
 * array; task_id NULL returns every record. */
ss_status ss_inspect_buffer(const char* dump_path, const char* task_id,
                            char** entries_json_out);

/* Finds one task by id in a JSONL task file:
 * {"id","template_id","nl","program","gold_result"}. */
ss_status ss_load_task(const char* tasks_path, const char* task_id, char** task_json_out);

/* Checkpointed model handle. */
typedef struct ss_model ss_model;

ss_status ss_model_open(const char* checkpoint_path, ss_model** out);
void ss_model_close(ss_model* m);

/* {"vocab_size","d_model","n_heads","n_layers","d_ff","context","step",
 *  "params"}. */
ss_status ss_model_info(const ss_model* m, char** info_json_out);

/* Samples n programs for a whitespace-tokenized specification. When
 * has_gold is nonzero each sample is scored against gold_result. Returns a
 * JSON array of {"text","parseable","correct","answer"} (answer null when
 * the sample does not execute). */
ss_status ss_model_sample(const ss_model* m, const char* nl_text, int n, double temperature,
                          int max_new, uint64_t seed, int has_gold, double gold_result,
                          char** samples_json_out);

#ifdef __cplusplus
}
#endif

#endif /* SELFSYNTH_H */
