#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsl.hpp"
#include "exec.hpp"
#include "rng.hpp"

// Random-program machinery shared by the property tests and fuzzers.
namespace test_helpers {

using namespace selfsynth;

inline ExprPtr random_expr(Rng& rng, const std::vector<std::string>& defined, int depth) {
    const bool can_ref = !defined.empty();
    const uint64_t roll = rng.below(100);
    if (depth <= 0 || roll < 35) {
        if (can_ref && roll % 2 == 0) {
            return Expr::make_var(defined[rng.below(defined.size())]);
        }
        // nonnegative: a negative literal is not source-representable (the
        // parser yields unary minus), and these programs must round-trip
        const double v = static_cast<double>(rng.below(21)) / 2.0;
        return Expr::make_literal(v);
    }
    if (roll < 45) {
        return Expr::make_neg(random_expr(rng, defined, depth - 1));
    }
    const BinOp op = static_cast<BinOp>(rng.below(5));
    return Expr::make_binary(op, random_expr(rng, defined, depth - 1),
                             random_expr(rng, defined, depth - 1));
}

// Any parseable program (may fail at run time).
inline Program random_program(Rng& rng, int min_lines, int max_lines) {
    static const std::vector<std::string> pool = {"q", "w", "z", "k", "m", "p", "h", "g"};
    const int lines = min_lines + static_cast<int>(rng.below(max_lines - min_lines + 1));
    Program p;
    std::vector<std::string> defined;
    for (int i = 0; i < lines; ++i) {
        std::string target;
        if (!defined.empty() && rng.below(5) == 0) {
            target = defined[rng.below(defined.size())];  // reassignment
        } else {
            target = pool[rng.below(pool.size())] + std::to_string(i);
        }
        Statement s{target, random_expr(rng, defined, 2)};
        if (std::find(defined.begin(), defined.end(), target) == defined.end()) {
            defined.push_back(target);
        }
        p.statements.push_back(std::move(s));
    }
    return p;
}

// A program that executes successfully and ends with an `answer=` line.
inline Program random_gold(Rng& rng, int min_lines, int max_lines) {
    for (;;) {
        Program p = random_program(rng, min_lines - 1, max_lines - 1);
        std::vector<std::string> defined;
        for (const auto& s : p.statements) defined.push_back(s.target);
        p.statements.push_back({"answer", random_expr(rng, defined, 2)});
        if (execute(p).ok()) return p;
    }
}

inline ExprPtr rename_expr(const Expr& e, std::unordered_map<std::string, std::string>& map) {
    switch (e.kind) {
        case Expr::Kind::Literal:
            return Expr::make_literal(e.literal);
        case Expr::Kind::Var: {
            auto it = map.find(e.name);
            return Expr::make_var(it == map.end() ? e.name : it->second);
        }
        case Expr::Kind::Unary:
            return Expr::make_neg(rename_expr(*e.lhs, map));
        case Expr::Kind::Binary:
            return Expr::make_binary(e.op, rename_expr(*e.lhs, map), rename_expr(*e.rhs, map));
    }
    return nullptr;
}

inline void collect_names(const Expr& e, std::vector<std::string>& order) {
    switch (e.kind) {
        case Expr::Kind::Var:
            if (std::find(order.begin(), order.end(), e.name) == order.end()) {
                order.push_back(e.name);
            }
            break;
        case Expr::Kind::Unary:
            collect_names(*e.lhs, order);
            break;
        case Expr::Kind::Binary:
            collect_names(*e.lhs, order);
            collect_names(*e.rhs, order);
            break;
        case Expr::Kind::Literal:
            break;
    }
}

// Consistently renames every identifier to a fresh name. `preserve_answer`
// keeps execution semantics (the answer lookup) intact.
inline Program rename_variables(const Program& p, Rng& rng, bool preserve_answer) {
    std::vector<std::string> order;
    for (const Statement& s : p.statements) {
        if (std::find(order.begin(), order.end(), s.target) == order.end()) {
            order.push_back(s.target);
        }
        collect_names(*s.expr, order);
    }
    std::unordered_map<std::string, std::string> map;
    const uint64_t salt = rng.below(1000);
    for (const std::string& name : order) {
        if (preserve_answer && name == "answer") {
            map.emplace(name, name);
        } else {
            map.emplace(name, "rn" + std::to_string(salt) + "_" + std::to_string(map.size()));
        }
    }
    Program out;
    for (const Statement& s : p.statements) {
        out.statements.push_back({map.at(s.target), rename_expr(*s.expr, map)});
    }
    return out;
}

}  // namespace test_helpers
