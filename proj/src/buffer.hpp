#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "exec.hpp"

namespace selfsynth {

enum class EntryKind { Empty, Gold, Fcp, Pcp };

const char* entry_kind_name(EntryKind k);
EntryKind entry_kind_from_name(const std::string& name);

struct BufferEntry {
    int id = 0;
    Program program;
    EntryKind kind = EntryKind::Pcp;
    std::vector<std::string> canon_stmts;       // per-statement canonical forms
    std::string canon_key;                      // whole-program canonical key
    std::vector<std::string> prefix_state_keys; // index i = state key after i statements (0..lines)
    int line_count = 0;

    const std::string& final_state_key() const { return prefix_state_keys.back(); }
};

struct BufferConfig {
    int length_slack = 0;
    Tolerance tolerance;
    StateOptions state;
    ExecLimits limits;
};

enum class CandidateKind { Fcp, Pcp };

struct Classification {
    enum class Kind { FullyCorrect, PartialPrefix, Useless };
    Kind kind = Kind::Useless;
    size_t prefix_len = 0;  // PartialPrefix only: largest matching prefix length (>= 1)
};

enum class InsertOutcome { Inserted, RejectedDuplicate, RejectedLength };

// Per-example buffer of the gold program plus self-sampled fully- and
// partially-correct programs, with the state->subprograms mapping used as
// the fast partial-correctness check. Single writer per buffer.
class ProgramBuffer {
public:
    // Throws GoldExecutionFailure if the gold program does not run to a result.
    ProgramBuffer(Program gold, BufferConfig config = {});

    const BufferConfig& config() const { return config_; }
    double gold_result() const { return gold_result_; }
    int gold_lines() const { return gold_lines_; }

    Classification classify(const Program& candidate) const;

    // For Pcp the candidate must already be the longest partially-correct
    // prefix (the classify result applied via prefix()).
    InsertOutcome try_insert(const Program& candidate, CandidateKind kind);

    // All entries except Empty, paired with the completeness flag that
    // decides EOS handling at encoding time.
    std::vector<std::pair<const Program*, bool>> training_targets() const;

    // Entries that are not fully correct (Empty and Pcps), in insertion order.
    std::vector<const Program*> sampling_starts() const;

    size_t size() const { return entries_.size(); }
    int fcp_count() const;  // excludes gold
    int pcp_count() const;

    // insertion-ordered view for inspection, dumps, and test oracles
    std::vector<const BufferEntry*> entries() const;

    const std::map<std::string, std::set<std::pair<int, int>>>& state_map() const {
        return state_map_;
    }

private:
    BufferEntry make_entry(Program program, EntryKind kind) const;
    void add_to_maps(const BufferEntry& e);
    bool is_prefix_of_existing(const BufferEntry& e) const;
    void insert_entry(BufferEntry e);

    BufferConfig config_;
    double gold_result_ = 0.0;
    int gold_lines_ = 0;
    int next_id_ = 0;
    std::map<int, BufferEntry> entries_;                              // by id (insertion order)
    std::unordered_map<std::string, int> canon_index_;                // canonical key -> entry id
    std::map<std::string, std::set<std::pair<int, int>>> state_map_;  // state key -> {(entry id, prefix len)}
};

}  // namespace selfsynth
