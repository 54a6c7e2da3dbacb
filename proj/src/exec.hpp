#pragma once

#include <string>
#include <vector>

#include "dsl.hpp"

namespace selfsynth {

// Runtime failures of a candidate program mark it incorrect for filtering;
// they are outcomes, not exceptions.
enum class ExecStatus {
    Ok,
    UndefinedVariable,
    DivisionByZero,
    NonFiniteValue,
    NoAnswer,
    StepLimit,
};

const char* exec_status_name(ExecStatus s);

struct ExecResult {
    ExecStatus status = ExecStatus::Ok;
    double answer = 0.0;  // final binding of `answer`, valid when status == Ok

    bool ok() const { return status == ExecStatus::Ok; }
};

struct ExecLimits {
    size_t max_statements = 256;
    double magnitude_cap = 1e12;
};

// Name-agnostic snapshot of the variable bindings after a program prefix.
// Values are quantized to 9 significant digits and sorted; under set
// semantics duplicates collapse.
struct State {
    std::vector<std::string> values;  // quantized, ascending
    std::string key;                  // values joined with ','; "" for the empty state

    std::string display() const;  // "{1,3,4}"
};

struct StateOptions {
    bool multiset = false;
};

struct TraceResult {
    std::vector<State> states;        // states after prefixes 1..k (k = last statement that ran)
    ExecStatus status = ExecStatus::Ok;  // error of the first failing statement, if any
    size_t failed_at = 0;             // 1-based statement index of the failure (when !ok)

    bool ok() const { return status == ExecStatus::Ok; }
};

std::string quantize_value(double v);

ExecResult execute(const Program& p, const ExecLimits& limits = {});

// State after the first `len` statements; requires the prefix to execute.
// Propagates the prefix's execution failure as GoldExecutionFailure-free
// sentinel: callers that can see failures use trace_all instead.
State trace(const Program& p, size_t len, const StateOptions& opts = {}, const ExecLimits& limits = {});

// Single pass over the program; on a runtime error returns the states of all
// prefixes before the failing statement plus the error marker.
TraceResult trace_all(const Program& p, const StateOptions& opts = {}, const ExecLimits& limits = {});

struct Tolerance {
    double atol = 1e-6;
    double rtol = 1e-6;
};

bool is_correct(double z, double z_star, const Tolerance& tol = {});
bool is_correct(const ExecResult& z, const ExecResult& z_star, const Tolerance& tol = {});

}  // namespace selfsynth
