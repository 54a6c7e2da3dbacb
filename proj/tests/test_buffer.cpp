#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "buffer.hpp"
#include "helpers.hpp"

using namespace selfsynth;

namespace {

const char* kGoldSrc = "n0=2.0\nn1=3.0\nt0=n0*n1\nanswer=t0+n0";  // answer 8

// Brute-force classification: re-traces every prefix of every buffered entry
// with the tracer and compares quantized states directly; no state_map.
Classification oracle_classify(const ProgramBuffer& buf, const Program& cand) {
    const ExecResult res = execute(cand, buf.config().limits);
    if (res.ok() && is_correct(res.answer, buf.gold_result(), buf.config().tolerance)) {
        return {Classification::Kind::FullyCorrect, cand.size()};
    }
    const TraceResult tr = trace_all(cand, buf.config().state, buf.config().limits);
    for (size_t i = tr.states.size(); i >= 1; --i) {
        for (const BufferEntry* e : buf.entries()) {
            for (int len = 0; len <= e->line_count; ++len) {
                const State s = trace(e->program, len, buf.config().state, buf.config().limits);
                if (s.key == tr.states[i - 1].key) {
                    return {Classification::Kind::PartialPrefix, i};
                }
            }
        }
    }
    return {Classification::Kind::Useless, 0};
}

// Recomputes the state map from scratch out of the current entries.
std::map<std::string, std::set<std::pair<int, int>>> recompute_state_map(
    const ProgramBuffer& buf) {
    std::map<std::string, std::set<std::pair<int, int>>> out;
    for (const BufferEntry* e : buf.entries()) {
        for (int len = 0; len <= e->line_count; ++len) {
            const State s = trace(e->program, len, buf.config().state, buf.config().limits);
            out[s.key].insert({e->id, len});
        }
    }
    return out;
}

void check_invariants(const ProgramBuffer& buf) {
    const auto entries = buf.entries();

    std::set<std::string> canon_keys;
    int empties = 0, golds = 0;
    for (const BufferEntry* e : entries) {
        canon_keys.insert(e->canon_key);
        empties += e->kind == EntryKind::Empty;
        golds += e->kind == EntryKind::Gold;
        if (e->kind == EntryKind::Fcp) {
            CHECK(e->line_count <= buf.gold_lines() + buf.config().length_slack);
            CHECK(is_correct(execute(e->program, buf.config().limits).answer, buf.gold_result(),
                             buf.config().tolerance));
        }
    }
    CHECK(canon_keys.size() == entries.size());  // canonical uniqueness
    CHECK(empties == 1);
    CHECK(golds == 1);

    // no PCP is a prefix of any other entry
    for (const BufferEntry* a : entries) {
        if (a->kind != EntryKind::Pcp) continue;
        for (const BufferEntry* b : entries) {
            if (a->id == b->id) continue;
            CHECK(!is_prefix(a->program, b->program));
        }
    }

    CHECK(recompute_state_map(buf) == buf.state_map());
}

}  // namespace

TEST_CASE("construction seeds EMPTY and GOLD") {
    const ProgramBuffer buf(parse(kGoldSrc));
    CHECK(buf.size() == 2);
    CHECK(buf.gold_result() == 8.0);
    CHECK(buf.gold_lines() == 4);
    CHECK(buf.state_map().size() == 5);  // 4 prefix states + the empty state
    CHECK(buf.state_map().count(""));
    CHECK(buf.fcp_count() == 0);
    CHECK(buf.pcp_count() == 0);

    const auto starts = buf.sampling_starts();
    REQUIRE(starts.size() == 1);  // gold is fully correct, excluded
    CHECK(starts[0]->empty());

    const auto targets = buf.training_targets();
    REQUIRE(targets.size() == 1);
    CHECK(targets[0].second);  // gold is complete
    CHECK(canonical_key(*targets[0].first) == canonical_key(parse(kGoldSrc)));

    CHECK_THROWS_AS(ProgramBuffer(parse("answer=1/0")), GoldExecutionFailure);
    CHECK_THROWS_AS(ProgramBuffer(parse("n0=5.0")), GoldExecutionFailure);
    CHECK_THROWS_AS(ProgramBuffer(Program{}), GoldExecutionFailure);
}

TEST_CASE("classify: worked example and design rules") {
    const ProgramBuffer buf(parse(kGoldSrc));

    // commuted multiplication keeps states {2},{2,3},{2,3,6}; answer 4 != 8
    const Program cand = parse("n0=2.0\nn1=3.0\nt0=n1*n0\nanswer=t0-n0");
    const Classification c = buf.classify(cand);
    CHECK(c.kind == Classification::Kind::PartialPrefix);
    CHECK(c.prefix_len == 3);

    CHECK(buf.classify(parse(kGoldSrc)).kind == Classification::Kind::FullyCorrect);
    CHECK(buf.classify(parse("n0=5.0\nanswer=n0")).kind == Classification::Kind::Useless);

    // answer match decides full correctness even when states differ entirely
    CHECK(buf.classify(parse("a=8.0\nanswer=a")).kind == Classification::Kind::FullyCorrect);

    // execution errors bound the prefix scan but do not disqualify
    const Classification e = buf.classify(parse("n0=2.0\nn1=3.0\nq=1/0"));
    CHECK(e.kind == Classification::Kind::PartialPrefix);
    CHECK(e.prefix_len == 2);

    CHECK(buf.classify(Program{}).kind == Classification::Kind::Useless);

    // within-tolerance answers count as fully correct
    CHECK(buf.classify(parse("answer=8.0000000001")).kind ==
          Classification::Kind::FullyCorrect);
}

TEST_CASE("try_insert: dedup, length rules, pruning") {
    ProgramBuffer buf(parse(kGoldSrc));

    // a consistent renaming of gold is a canonical duplicate
    CHECK(buf.try_insert(parse("x0=2.0\nx1=3.0\nu=x0*x1\nanswer=u+x0"), CandidateKind::Fcp) ==
          InsertOutcome::RejectedDuplicate);

    // short FCP with fresh structure
    CHECK(buf.try_insert(parse("a=8.0\nanswer=a"), CandidateKind::Fcp) == InsertOutcome::Inserted);
    CHECK(buf.fcp_count() == 1);

    // FCP longer than gold + slack
    const Program long_fcp = parse("a=1\nb=1\nc=1\nd=1\nanswer=8.0");
    CHECK(buf.try_insert(long_fcp, CandidateKind::Fcp) == InsertOutcome::RejectedLength);
    {
        BufferConfig cfg;
        cfg.length_slack = 1;
        ProgramBuffer slack_buf(parse(kGoldSrc), cfg);
        CHECK(slack_buf.try_insert(long_fcp, CandidateKind::Fcp) == InsertOutcome::Inserted);
    }

    // PCP chain: the 2-line entry is pruned when its 3-line extension arrives
    const Program c2 = parse("n1=3.0\nn0=2.0");
    const Classification cl2 = buf.classify(c2);
    CHECK(cl2.kind == Classification::Kind::PartialPrefix);
    CHECK(cl2.prefix_len == 2);
    CHECK(buf.try_insert(c2, CandidateKind::Pcp) == InsertOutcome::Inserted);
    CHECK(buf.pcp_count() == 1);

    const Program c3 = parse("n1=3.0\nn0=2.0\nt0=n0*n1");
    CHECK(buf.classify(c3).kind == Classification::Kind::PartialPrefix);
    CHECK(buf.try_insert(c3, CandidateKind::Pcp) == InsertOutcome::Inserted);
    CHECK(buf.pcp_count() == 1);  // c2 pruned, c3 in

    // the surviving PCP is c3: a fresh prefix of it is a duplicate now
    CHECK(buf.try_insert(c2, CandidateKind::Pcp) == InsertOutcome::RejectedDuplicate);
    CHECK(buf.try_insert(parse("q=3.0"), CandidateKind::Pcp) == InsertOutcome::RejectedDuplicate);

    // a 3-line PCP reaching a 2-line state is too long
    const Program lazy = parse("q=2.0\nw=3.0\ne=2.0");
    CHECK(buf.classify(lazy).kind == Classification::Kind::PartialPrefix);
    CHECK(buf.classify(lazy).prefix_len == 3);  // {2,3} under set semantics
    CHECK(buf.try_insert(lazy, CandidateKind::Pcp) == InsertOutcome::RejectedLength);

    // gold and FCPs never pruned; starts/targets reflect kinds
    const auto starts = buf.sampling_starts();
    CHECK(starts.size() == 2);  // EMPTY + c3
    const auto targets = buf.training_targets();
    CHECK(targets.size() == 3);  // gold + fcp + c3
    int complete = 0;
    for (const auto& [prog, is_complete] : targets) complete += is_complete;
    CHECK(complete == 2);

    check_invariants(buf);
}

TEST_CASE("classify agrees with the brute-force oracle on random buffers") {
    Rng rng(1331);
    int partials = 0, fcps = 0, useless = 0;
    for (int round = 0; round < 60; ++round) {
        const Program gold = test_helpers::random_gold(rng, 2, 5);
        ProgramBuffer buf(gold);
        for (int step = 0; step < 25; ++step) {
            Program cand;
            const uint64_t pick = rng.below(4);
            if (pick == 0) {
                cand = test_helpers::random_program(rng, 1, 6);
            } else if (pick == 1) {
                // gold prefix plus random continuation: likely PartialPrefix
                cand = prefix(gold, rng.below(gold.size() + 1));
                const Program extra = test_helpers::random_program(rng, 1, 2);
                for (const auto& s : extra.statements) cand.statements.push_back(s);
            } else if (pick == 2) {
                cand = test_helpers::rename_variables(gold, rng, true);
            } else {
                cand = test_helpers::rename_variables(
                    prefix(gold, rng.below(gold.size() + 1)), rng, false);
            }

            const Classification got = buf.classify(cand);
            const Classification want = oracle_classify(buf, cand);
            CAPTURE(pretty_print(gold));
            CAPTURE(pretty_print(cand));
            REQUIRE(got.kind == want.kind);
            if (got.kind == Classification::Kind::PartialPrefix) {
                REQUIRE(got.prefix_len == want.prefix_len);
                ++partials;
                buf.try_insert(prefix(cand, got.prefix_len), CandidateKind::Pcp);
            } else if (got.kind == Classification::Kind::FullyCorrect) {
                ++fcps;
                buf.try_insert(cand, CandidateKind::Fcp);
            } else {
                ++useless;
            }
        }
        check_invariants(buf);
    }
    // the generator must actually exercise all three outcomes
    CHECK(partials > 100);
    CHECK(fcps > 60);
    CHECK(useless > 100);
}

TEST_CASE("fuzz: invariants hold and FCP content is monotone") {
    Rng rng(9001);
    for (int round = 0; round < 8; ++round) {
        const Program gold = test_helpers::random_gold(rng, 2, 5);
        ProgramBuffer buf(gold);
        std::set<std::string> fcp_keys_seen;

        for (int step = 0; step < 200; ++step) {
            Program cand;
            if (rng.below(2) == 0) {
                cand = prefix(gold, rng.below(gold.size() + 1));
                const Program extra = test_helpers::random_program(rng, 1, 3);
                for (const auto& s : extra.statements) cand.statements.push_back(s);
            } else {
                cand = test_helpers::random_program(rng, 1, 6);
            }

            const Classification c = buf.classify(cand);
            if (c.kind == Classification::Kind::FullyCorrect) {
                buf.try_insert(cand, CandidateKind::Fcp);
            } else if (c.kind == Classification::Kind::PartialPrefix) {
                buf.try_insert(prefix(cand, c.prefix_len), CandidateKind::Pcp);
            }

            if (step % 50 == 49) check_invariants(buf);

            // FCP canonical keys never disappear
            std::set<std::string> now;
            for (const BufferEntry* e : buf.entries()) {
                if (e->kind == EntryKind::Fcp) now.insert(e->canon_key);
            }
            for (const std::string& k : fcp_keys_seen) CHECK(now.count(k) == 1);
            fcp_keys_seen = std::move(now);
        }
        check_invariants(buf);
    }
}

TEST_CASE("pcp insert without a matching state is rejected loudly") {
    ProgramBuffer buf(parse(kGoldSrc));
    CHECK_THROWS_AS(buf.try_insert(parse("z=99.0"), CandidateKind::Pcp), InvalidArguments);
    CHECK_THROWS_AS(buf.try_insert(parse("a=1/0"), CandidateKind::Fcp), InvalidArguments);
}

TEST_CASE("entry kind names round-trip") {
    for (EntryKind k : {EntryKind::Empty, EntryKind::Gold, EntryKind::Fcp, EntryKind::Pcp}) {
        CHECK(entry_kind_from_name(entry_kind_name(k)) == k);
    }
    CHECK_THROWS_AS(entry_kind_from_name("nope"), InvalidArguments);
}
