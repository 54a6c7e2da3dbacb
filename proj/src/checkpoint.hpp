#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "model.hpp"
#include "vocab.hpp"

namespace selfsynth {

struct AdamState {
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
    int64_t t = 0;          // completed update count (bias correction)
};

// Self-contained snapshot: everything eval/sample need to rebuild the model
// (including the vocabulary) plus everything train needs to resume exactly.
struct Checkpoint {
    ModelConfig config;
    std::vector<std::string> vocab_tokens;
    std::vector<double> params;
    bool has_optimizer = false;
    AdamState optimizer;
    std::string rng_state;  // serialized engine, empty when not resuming
    int64_t step = 0;

    Model make_model() const;
    Vocabulary make_vocabulary() const;
};

// Binary layout (version 1, little-endian):
//   "SSCK" u32=1 | 6 x i32 config | u32 n_tokens, n x (u32 len, bytes)
//   | u64 n_params, doubles | u8 has_optimizer [, u64 n, m[], v[], i64 t]
//   | u32 len, rng bytes | i64 step
void save_checkpoint(const std::string& path, const Checkpoint& ck);  // throws IoError
Checkpoint load_checkpoint(const std::string& path);  // throws IoError, MalformedRecord

}  // namespace selfsynth
