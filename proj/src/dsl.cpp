#include "dsl.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <unordered_map>
#include <unordered_set>

namespace selfsynth {

ExprPtr Expr::make_literal(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Literal;
    e->literal = v;
    return e;
}

ExprPtr Expr::make_var(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Var;
    e->name = std::move(name);
    return e;
}

ExprPtr Expr::make_neg(ExprPtr c) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Unary;
    e->lhs = std::move(c);
    return e;
}

ExprPtr Expr::make_binary(BinOp op, ExprPtr l, ExprPtr r) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Binary;
    e->op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
}

std::string format_double(double v) {
    std::array<char, 64> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

// ---------------------------------------------------------------- lexer

namespace {

enum class Tok { Ident, Number, Assign, Plus, Minus, Star, Slash, DblStar, LParen, RParen, Newline, End };

struct Token {
    Tok kind;
    std::string text;
    double value = 0.0;  // Number
};

const std::unordered_set<std::string>& rejected_keywords() {
    static const std::unordered_set<std::string> kw = {
        "while", "for",    "if",   "else", "elif",  "def",    "import", "from",
        "return", "lambda", "class", "with", "try",  "except", "raise",  "pass",
        "break",  "continue", "in",  "not",  "and",  "or",     "global", "assert",
        "yield",  "del",    "print"};
    return kw;
}

std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = src.size();
    auto push = [&](Tok k, std::string t) { out.push_back({k, std::move(t)}); };

    while (i < n) {
        const char c = src[i];
        if (c == '#') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '\n' || c == ';') {
            push(Tok::Newline, "\n");
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < n && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            std::string word = src.substr(i, j - i);
            if (rejected_keywords().count(word)) {
                throw UnsupportedConstruct("unsupported keyword '" + word + "'");
            }
            push(Tok::Ident, std::move(word));
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            size_t j = i;
            while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < n && src[j] == '.') {
                ++j;
                while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < n && (src[j] == 'e' || src[j] == 'E')) {
                size_t k = j + 1;
                if (k < n && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < n && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    ++k;
                    while (k < n && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                }
            }
            std::string text = src.substr(i, j - i);
            Token t{Tok::Number, text};
            t.value = std::strtod(text.c_str(), nullptr);
            out.push_back(std::move(t));
            i = j;
            continue;
        }
        switch (c) {
            case '=':
                if (i + 1 < n && src[i + 1] == '=') throw UnsupportedConstruct("comparison '==' not supported");
                push(Tok::Assign, "=");
                ++i;
                break;
            case '+':
                push(Tok::Plus, "+");
                ++i;
                break;
            case '-':
                push(Tok::Minus, "-");
                ++i;
                break;
            case '*':
                if (i + 1 < n && src[i + 1] == '*') {
                    push(Tok::DblStar, "**");
                    i += 2;
                } else {
                    push(Tok::Star, "*");
                    ++i;
                }
                break;
            case '/':
                push(Tok::Slash, "/");
                ++i;
                break;
            case '(':
                push(Tok::LParen, "(");
                ++i;
                break;
            case ')':
                push(Tok::RParen, ")");
                ++i;
                break;
            case ':':
                throw UnsupportedConstruct("block statements not supported");
            case ',':
            case '[':
            case ']':
            case '{':
            case '}':
                throw UnsupportedConstruct(std::string("unsupported token '") + c + "'");
            default:
                throw SyntaxError(std::string("unexpected character '") + c + "'");
        }
    }
    push(Tok::End, "");
    return out;
}

// --------------------------------------------------------------- parser

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Program run() {
        Program p;
        skip_newlines();
        while (!at(Tok::End)) {
            p.statements.push_back(statement());
            if (!at(Tok::End) && !at(Tok::Newline)) {
                throw SyntaxError("expected end of statement near '" + cur().text + "'");
            }
            skip_newlines();
        }
        return p;
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    bool at(Tok k) const { return cur().kind == k; }
    const Token& eat() { return toks_[pos_++]; }

    void skip_newlines() {
        while (at(Tok::Newline)) ++pos_;
    }

    Statement statement() {
        if (!at(Tok::Ident)) throw SyntaxError("expected identifier at statement start");
        std::string target = eat().text;
        if (!at(Tok::Assign)) throw SyntaxError("expected '=' after '" + target + "'");
        eat();
        ExprPtr e = expr();
        return Statement{std::move(target), std::move(e)};
    }

    ExprPtr expr() { return additive(); }

    ExprPtr additive() {
        ExprPtr lhs = multiplicative();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            const BinOp op = at(Tok::Plus) ? BinOp::Add : BinOp::Sub;
            eat();
            lhs = Expr::make_binary(op, std::move(lhs), multiplicative());
        }
        return lhs;
    }

    ExprPtr multiplicative() {
        ExprPtr lhs = unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            const BinOp op = at(Tok::Star) ? BinOp::Mul : BinOp::Div;
            eat();
            lhs = Expr::make_binary(op, std::move(lhs), unary());
        }
        return lhs;
    }

    // unary minus binds tighter than * but looser than ** (Python rules)
    ExprPtr unary() {
        if (at(Tok::Minus)) {
            eat();
            return Expr::make_neg(unary());
        }
        return power();
    }

    ExprPtr power() {
        ExprPtr base = atom();
        if (at(Tok::DblStar)) {
            eat();
            return Expr::make_binary(BinOp::Pow, std::move(base), unary());
        }
        return base;
    }

    ExprPtr atom() {
        if (at(Tok::Number)) {
            return Expr::make_literal(eat().value);
        }
        if (at(Tok::Ident)) {
            std::string name = eat().text;
            if (at(Tok::LParen)) throw UnsupportedConstruct("function call '" + name + "(...)' not supported");
            return Expr::make_var(std::move(name));
        }
        if (at(Tok::LParen)) {
            eat();
            ExprPtr e = expr();
            if (!at(Tok::RParen)) throw SyntaxError("expected ')'");
            eat();
            return e;
        }
        throw SyntaxError("expected expression near '" + cur().text + "'");
    }

    std::vector<Token> toks_;
    size_t pos_ = 0;
};

int precedence(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Literal:
        case Expr::Kind::Var:
            return 100;
        case Expr::Kind::Unary:
            return 25;
        case Expr::Kind::Binary:
            switch (e.op) {
                case BinOp::Add:
                case BinOp::Sub:
                    return 10;
                case BinOp::Mul:
                case BinOp::Div:
                    return 20;
                case BinOp::Pow:
                    return 30;
            }
    }
    return 100;
}

const char* op_text(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Pow: return "**";
    }
    return "?";
}

void print_expr(const Expr& e, std::string& out) {
    auto child = [&](const Expr& c, bool need_parens) {
        if (need_parens) out += '(';
        print_expr(c, out);
        if (need_parens) out += ')';
    };
    switch (e.kind) {
        case Expr::Kind::Literal:
            out += format_double(e.literal);
            break;
        case Expr::Kind::Var:
            out += e.name;
            break;
        case Expr::Kind::Unary:
            out += '-';
            child(*e.lhs, precedence(*e.lhs) < 25);
            break;
        case Expr::Kind::Binary: {
            const int p = precedence(e);
            if (e.op == BinOp::Pow) {
                // right-associative
                child(*e.lhs, precedence(*e.lhs) <= p);
                out += op_text(e.op);
                child(*e.rhs, precedence(*e.rhs) < p);
            } else {
                child(*e.lhs, precedence(*e.lhs) < p);
                out += op_text(e.op);
                child(*e.rhs, precedence(*e.rhs) <= p);
            }
            break;
        }
    }
}

const char* canon_op(BinOp op) {
    switch (op) {
        case BinOp::Add: return "add";
        case BinOp::Sub: return "sub";
        case BinOp::Mul: return "mul";
        case BinOp::Div: return "div";
        case BinOp::Pow: return "pow";
    }
    return "?";
}

using Renaming = std::unordered_map<std::string, std::string>;

const std::string& renamed(Renaming& map, const std::string& name) {
    auto it = map.find(name);
    if (it == map.end()) {
        it = map.emplace(name, "v" + std::to_string(map.size())).first;
    }
    return it->second;
}

void canon_expr(const Expr& e, Renaming& map, std::string& out) {
    switch (e.kind) {
        case Expr::Kind::Literal:
            out += "lit:";
            out += format_double(e.literal);
            break;
        case Expr::Kind::Var:
            out += renamed(map, e.name);
            break;
        case Expr::Kind::Unary:
            out += "neg(";
            canon_expr(*e.lhs, map, out);
            out += ')';
            break;
        case Expr::Kind::Binary:
            out += canon_op(e.op);
            out += '(';
            canon_expr(*e.lhs, map, out);
            out += ',';
            canon_expr(*e.rhs, map, out);
            out += ')';
            break;
    }
}

void collect_lexemes(const Expr& e, std::vector<std::string>& out) {
    switch (e.kind) {
        case Expr::Kind::Literal:
            out.push_back(format_double(e.literal));
            break;
        case Expr::Kind::Var:
            out.push_back(e.name);
            break;
        case Expr::Kind::Unary:
            out.push_back("-");
            if (precedence(*e.lhs) < 25) {
                out.push_back("(");
                collect_lexemes(*e.lhs, out);
                out.push_back(")");
            } else {
                collect_lexemes(*e.lhs, out);
            }
            break;
        case Expr::Kind::Binary: {
            const int p = precedence(e);
            const bool lp = e.op == BinOp::Pow ? precedence(*e.lhs) <= p : precedence(*e.lhs) < p;
            const bool rp = e.op == BinOp::Pow ? precedence(*e.rhs) < p : precedence(*e.rhs) <= p;
            if (lp) out.push_back("(");
            collect_lexemes(*e.lhs, out);
            if (lp) out.push_back(")");
            out.push_back(op_text(e.op));
            if (rp) out.push_back("(");
            collect_lexemes(*e.rhs, out);
            if (rp) out.push_back(")");
            break;
        }
    }
}

}  // namespace

Program parse(const std::string& source) {
    return Parser(lex(source)).run();
}

std::optional<Program> try_parse(const std::string& source) {
    try {
        return parse(source);
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::string pretty_print(const Statement& s) {
    std::string out = s.target;
    out += '=';
    print_expr(*s.expr, out);
    return out;
}

std::string pretty_print(const Program& p) {
    std::string out;
    for (size_t i = 0; i < p.statements.size(); ++i) {
        if (i) out += '\n';
        out += pretty_print(p.statements[i]);
    }
    return out;
}

Program prefix(const Program& p, size_t len) {
    Program out;
    out.statements.assign(p.statements.begin(), p.statements.begin() + std::min(len, p.size()));
    return out;
}

std::vector<std::string> canonical_statements(const Program& p) {
    std::vector<std::string> out;
    out.reserve(p.size());
    Renaming map;
    for (const Statement& s : p.statements) {
        std::string line = renamed(map, s.target);
        line += '=';
        canon_expr(*s.expr, map, line);
        out.push_back(std::move(line));
    }
    return out;
}

std::string canonical_key(const Program& p) {
    std::string out;
    for (const std::string& s : canonical_statements(p)) {
        out += s;
        out += ';';
    }
    return out;
}

bool is_prefix(const Program& p, const Program& q) {
    if (p.size() > q.size()) return false;
    const auto cp = canonical_statements(p);
    const auto cq = canonical_statements(q);
    return std::equal(cp.begin(), cp.end(), cq.begin());
}

std::vector<std::string> statement_lexemes(const Statement& s) {
    std::vector<std::string> out{s.target, "="};
    collect_lexemes(*s.expr, out);
    return out;
}

}  // namespace selfsynth
