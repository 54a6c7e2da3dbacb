#include "exec.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace selfsynth {

const char* exec_status_name(ExecStatus s) {
    switch (s) {
        case ExecStatus::Ok: return "ok";
        case ExecStatus::UndefinedVariable: return "undefined_variable";
        case ExecStatus::DivisionByZero: return "division_by_zero";
        case ExecStatus::NonFiniteValue: return "non_finite_value";
        case ExecStatus::NoAnswer: return "no_answer";
        case ExecStatus::StepLimit: return "step_limit";
    }
    return "?";
}

std::string quantize_value(double v) {
    std::array<char, 64> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::general, 9);
    std::string s(buf.data(), ptr);
    if (s == "-0") s = "0";
    return s;
}

std::string State::display() const {
    std::string out = "{";
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += values[i];
    }
    out += '}';
    return out;
}

namespace {

// Bindings in definition order; small programs, linear scan is fine.
struct Env {
    std::vector<std::pair<std::string, double>> vars;

    double* find(const std::string& name) {
        for (auto& [n, v] : vars) {
            if (n == name) return &v;
        }
        return nullptr;
    }

    void assign(const std::string& name, double value) {
        if (double* slot = find(name)) {
            *slot = value;
        } else {
            vars.emplace_back(name, value);
        }
    }
};

ExecStatus eval_expr(const Expr& e, Env& env, double& out) {
    switch (e.kind) {
        case Expr::Kind::Literal:
            out = e.literal;
            return ExecStatus::Ok;
        case Expr::Kind::Var: {
            const double* v = env.find(e.name);
            if (!v) return ExecStatus::UndefinedVariable;
            out = *v;
            return ExecStatus::Ok;
        }
        case Expr::Kind::Unary: {
            double c;
            if (auto st = eval_expr(*e.lhs, env, c); st != ExecStatus::Ok) return st;
            out = -c;
            return ExecStatus::Ok;
        }
        case Expr::Kind::Binary: {
            double l, r;
            if (auto st = eval_expr(*e.lhs, env, l); st != ExecStatus::Ok) return st;
            if (auto st = eval_expr(*e.rhs, env, r); st != ExecStatus::Ok) return st;
            switch (e.op) {
                case BinOp::Add: out = l + r; break;
                case BinOp::Sub: out = l - r; break;
                case BinOp::Mul: out = l * r; break;
                case BinOp::Div:
                    if (r == 0.0) return ExecStatus::DivisionByZero;
                    out = l / r;
                    break;
                case BinOp::Pow: out = std::pow(l, r); break;
            }
            return ExecStatus::Ok;
        }
    }
    return ExecStatus::Ok;
}

ExecStatus run_statement(const Statement& s, Env& env, const ExecLimits& limits) {
    double value;
    if (auto st = eval_expr(*s.expr, env, value); st != ExecStatus::Ok) return st;
    if (!std::isfinite(value) || std::abs(value) > limits.magnitude_cap) {
        return ExecStatus::NonFiniteValue;
    }
    env.assign(s.target, value);
    return ExecStatus::Ok;
}

State snapshot(const Env& env, const StateOptions& opts) {
    std::vector<double> vals;
    vals.reserve(env.vars.size());
    for (const auto& [n, v] : env.vars) vals.push_back(v);
    std::sort(vals.begin(), vals.end());

    State st;
    st.values.reserve(vals.size());
    for (double v : vals) {
        std::string q = quantize_value(v);
        if (!opts.multiset && !st.values.empty() && st.values.back() == q) continue;
        st.values.push_back(std::move(q));
    }
    for (size_t i = 0; i < st.values.size(); ++i) {
        if (i) st.key += ',';
        st.key += st.values[i];
    }
    return st;
}

}  // namespace

ExecResult execute(const Program& p, const ExecLimits& limits) {
    Env env;
    size_t steps = 0;
    for (const Statement& s : p.statements) {
        if (++steps > limits.max_statements) return {ExecStatus::StepLimit, 0.0};
        if (auto st = run_statement(s, env, limits); st != ExecStatus::Ok) return {st, 0.0};
    }
    const double* answer = env.find("answer");
    if (!answer) return {ExecStatus::NoAnswer, 0.0};
    return {ExecStatus::Ok, *answer};
}

TraceResult trace_all(const Program& p, const StateOptions& opts, const ExecLimits& limits) {
    TraceResult out;
    Env env;
    size_t steps = 0;
    for (size_t i = 0; i < p.statements.size(); ++i) {
        ExecStatus st = ExecStatus::Ok;
        if (++steps > limits.max_statements) {
            st = ExecStatus::StepLimit;
        } else {
            st = run_statement(p.statements[i], env, limits);
        }
        if (st != ExecStatus::Ok) {
            out.status = st;
            out.failed_at = i + 1;
            return out;
        }
        out.states.push_back(snapshot(env, opts));
    }
    return out;
}

State trace(const Program& p, size_t len, const StateOptions& opts, const ExecLimits& limits) {
    if (len > p.size()) throw InvalidArguments("trace: prefix length exceeds program length");
    if (len == 0) return State{};
    const TraceResult tr = trace_all(prefix(p, len), opts, limits);
    if (!tr.ok()) {
        throw InvalidArguments(std::string("trace: prefix fails to execute (") +
                               exec_status_name(tr.status) + ")");
    }
    return tr.states[len - 1];
}

bool is_correct(double z, double z_star, const Tolerance& tol) {
    return std::abs(z - z_star) <= tol.atol + tol.rtol * std::max(std::abs(z), std::abs(z_star));
}

bool is_correct(const ExecResult& z, const ExecResult& z_star, const Tolerance& tol) {
    if (!z.ok() || !z_star.ok()) return false;
    return is_correct(z.answer, z_star.answer, tol);
}

}  // namespace selfsynth
