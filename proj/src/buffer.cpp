#include "buffer.hpp"

#include <algorithm>

namespace selfsynth {

const char* entry_kind_name(EntryKind k) {
    switch (k) {
        case EntryKind::Empty: return "EMPTY";
        case EntryKind::Gold: return "GOLD";
        case EntryKind::Fcp: return "FCP";
        case EntryKind::Pcp: return "PCP";
    }
    return "?";
}

EntryKind entry_kind_from_name(const std::string& name) {
    if (name == "EMPTY") return EntryKind::Empty;
    if (name == "GOLD") return EntryKind::Gold;
    if (name == "FCP") return EntryKind::Fcp;
    if (name == "PCP") return EntryKind::Pcp;
    throw InvalidArguments("unknown buffer entry kind '" + name + "'");
}

ProgramBuffer::ProgramBuffer(Program gold, BufferConfig config) : config_(std::move(config)) {
    const ExecResult res = execute(gold, config_.limits);
    if (!res.ok()) {
        throw GoldExecutionFailure(std::string("gold program failed: ") +
                                   exec_status_name(res.status));
    }
    gold_result_ = res.answer;
    gold_lines_ = static_cast<int>(gold.size());

    insert_entry(make_entry(Program{}, EntryKind::Empty));
    insert_entry(make_entry(std::move(gold), EntryKind::Gold));
}

BufferEntry ProgramBuffer::make_entry(Program program, EntryKind kind) const {
    BufferEntry e;
    e.kind = kind;
    e.line_count = static_cast<int>(program.size());
    e.canon_stmts = canonical_statements(program);
    e.canon_key = canonical_key(program);
    const TraceResult tr = trace_all(program, config_.state, config_.limits);
    if (!tr.ok()) {
        // only classified programs may be inserted
        throw InvalidArguments(std::string("buffer entry fails to execute: ") +
                               exec_status_name(tr.status));
    }
    e.prefix_state_keys.reserve(program.size() + 1);
    e.prefix_state_keys.push_back("");  // empty prefix
    for (const State& s : tr.states) e.prefix_state_keys.push_back(s.key);
    e.program = std::move(program);
    return e;
}

void ProgramBuffer::add_to_maps(const BufferEntry& e) {
    canon_index_.emplace(e.canon_key, e.id);
    for (int len = 0; len <= e.line_count; ++len) {
        state_map_[e.prefix_state_keys[len]].insert({e.id, len});
    }
}

void ProgramBuffer::insert_entry(BufferEntry e) {
    e.id = next_id_++;
    add_to_maps(e);
    entries_.emplace(e.id, std::move(e));
}

Classification ProgramBuffer::classify(const Program& candidate) const {
    const ExecResult res = execute(candidate, config_.limits);
    if (res.ok() && is_correct(res.answer, gold_result_, config_.tolerance)) {
        return {Classification::Kind::FullyCorrect, candidate.size()};
    }
    const TraceResult tr = trace_all(candidate, config_.state, config_.limits);
    for (size_t i = tr.states.size(); i >= 1; --i) {
        if (state_map_.count(tr.states[i - 1].key)) {
            return {Classification::Kind::PartialPrefix, i};
        }
    }
    return {Classification::Kind::Useless, 0};
}

bool ProgramBuffer::is_prefix_of_existing(const BufferEntry& e) const {
    for (const auto& [id, other] : entries_) {
        if (other.line_count < e.line_count) continue;
        if (std::equal(e.canon_stmts.begin(), e.canon_stmts.end(), other.canon_stmts.begin())) {
            return true;
        }
    }
    return false;
}

InsertOutcome ProgramBuffer::try_insert(const Program& candidate, CandidateKind kind) {
    BufferEntry e = make_entry(candidate, kind == CandidateKind::Fcp ? EntryKind::Fcp : EntryKind::Pcp);

    if (canon_index_.count(e.canon_key)) return InsertOutcome::RejectedDuplicate;
    if (is_prefix_of_existing(e)) return InsertOutcome::RejectedDuplicate;

    if (kind == CandidateKind::Fcp) {
        if (e.line_count > gold_lines_ + config_.length_slack) return InsertOutcome::RejectedLength;
    } else {
        // compared against the shortest known subprogram reaching the same state
        const auto it = state_map_.find(e.final_state_key());
        if (it == state_map_.end()) {
            throw InvalidArguments("Pcp insert requires a classified partially-correct prefix");
        }
        int min_lines = it->second.begin()->second;
        for (const auto& [id, len] : it->second) min_lines = std::min(min_lines, len);
        if (e.line_count > min_lines + config_.length_slack) return InsertOutcome::RejectedLength;
    }

    // prune Pcp entries subsumed by the new program
    std::vector<int> pruned;
    for (const auto& [id, other] : entries_) {
        if (other.kind != EntryKind::Pcp) continue;
        if (other.line_count > e.line_count) continue;
        if (std::equal(other.canon_stmts.begin(), other.canon_stmts.end(), e.canon_stmts.begin())) {
            pruned.push_back(id);
        }
    }
    for (int id : pruned) {
        const BufferEntry& victim = entries_.at(id);
        canon_index_.erase(victim.canon_key);
        for (int len = 0; len <= victim.line_count; ++len) {
            auto it = state_map_.find(victim.prefix_state_keys[len]);
            it->second.erase({id, len});
            if (it->second.empty()) state_map_.erase(it);
        }
        entries_.erase(id);
    }

    insert_entry(std::move(e));
    return InsertOutcome::Inserted;
}

std::vector<std::pair<const Program*, bool>> ProgramBuffer::training_targets() const {
    std::vector<std::pair<const Program*, bool>> out;
    for (const auto& [id, e] : entries_) {
        if (e.kind == EntryKind::Empty) continue;
        out.emplace_back(&e.program, e.kind == EntryKind::Gold || e.kind == EntryKind::Fcp);
    }
    return out;
}

std::vector<const Program*> ProgramBuffer::sampling_starts() const {
    std::vector<const Program*> out;
    for (const auto& [id, e] : entries_) {
        if (e.kind == EntryKind::Empty || e.kind == EntryKind::Pcp) out.push_back(&e.program);
    }
    return out;
}

int ProgramBuffer::fcp_count() const {
    int n = 0;
    for (const auto& [id, e] : entries_) n += e.kind == EntryKind::Fcp;
    return n;
}

int ProgramBuffer::pcp_count() const {
    int n = 0;
    for (const auto& [id, e] : entries_) n += e.kind == EntryKind::Pcp;
    return n;
}

std::vector<const BufferEntry*> ProgramBuffer::entries() const {
    std::vector<const BufferEntry*> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) out.push_back(&e);
    return out;
}

}  // namespace selfsynth
