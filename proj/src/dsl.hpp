#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace selfsynth {

// Straight-line numeric programs: one assignment per statement, expressions
// over identifiers, float literals, + - * / ** and unary minus. No control
// flow, no calls.

enum class BinOp { Add, Sub, Mul, Div, Pow };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Literal, Var, Unary, Binary };
    Kind kind;
    double literal = 0.0;     // Literal
    std::string name;         // Var
    BinOp op = BinOp::Add;    // Binary
    ExprPtr lhs, rhs;         // Binary; Unary uses lhs only

    static ExprPtr make_literal(double v);
    static ExprPtr make_var(std::string name);
    static ExprPtr make_neg(ExprPtr e);
    static ExprPtr make_binary(BinOp op, ExprPtr l, ExprPtr r);
};

struct Statement {
    std::string target;
    ExprPtr expr;
};

struct Program {
    std::vector<Statement> statements;

    size_t size() const { return statements.size(); }
    bool empty() const { return statements.empty(); }
};

// Throws SyntaxError / UnsupportedConstruct.
Program parse(const std::string& source);

// Parse failures of sampled text are data; this variant never throws.
std::optional<Program> try_parse(const std::string& source);

// Newline-separated statements; literals printed in shortest round-trip form.
std::string pretty_print(const Program& p);
std::string pretty_print(const Statement& s);

Program prefix(const Program& p, size_t len);

// One canonical string per statement, with variables alpha-renamed in order
// of first definition across the whole program. Two programs are structural
// duplicates iff their sequences are equal.
std::vector<std::string> canonical_statements(const Program& p);

// Whole-program canonical key (the joined statement sequence).
std::string canonical_key(const Program& p);

// True iff p's canonical statement sequence is a leading subsequence of q's.
bool is_prefix(const Program& p, const Program& q);

// Shortest decimal string that round-trips to v.
std::string format_double(double v);

// Surface lexemes of one statement, in source order (used for tokenization).
std::vector<std::string> statement_lexemes(const Statement& s);

}  // namespace selfsynth
