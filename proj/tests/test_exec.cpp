#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "exec.hpp"
#include "helpers.hpp"

using namespace selfsynth;

TEST_CASE("execute returns the final answer binding") {
    CHECK(execute(parse("n0=2.0\nn1=3.0\nanswer=n0*n1")).answer == 6.0);
    CHECK(execute(parse("answer=1\nanswer=2")).answer == 2.0);
    CHECK(execute(parse("answer=2**10")).answer == 1024.0);

    CHECK(execute(parse("answer=1.0/0.0")).status == ExecStatus::DivisionByZero);
    CHECK(execute(parse("n0=5.0")).status == ExecStatus::NoAnswer);
    CHECK(execute(Program{}).status == ExecStatus::NoAnswer);
    CHECK(execute(parse("answer=x")).status == ExecStatus::UndefinedVariable);
    CHECK(execute(parse("a=1\nb=1/(a-a)\nanswer=1")).status == ExecStatus::DivisionByZero);
}

TEST_CASE("magnitude cap and non-finite guards") {
    CHECK(execute(parse("answer=1e11*100")).status == ExecStatus::NonFiniteValue);
    CHECK(execute(parse("answer=10**13")).status == ExecStatus::NonFiniteValue);
    CHECK(execute(parse("answer=0**-1")).status == ExecStatus::NonFiniteValue);  // inf
    CHECK(execute(parse("answer=1e12")).ok());  // cap is inclusive

    ExecLimits loose;
    loose.magnitude_cap = 1e15;
    CHECK(execute(parse("answer=1e11*100"), loose).answer == 1e13);
}

TEST_CASE("step limit bounds execution") {
    std::string src;
    for (int i = 0; i < 257; ++i) src += "a=1\n";
    src += "answer=a";
    CHECK(execute(parse(src)).status == ExecStatus::StepLimit);

    ExecLimits tight;
    tight.max_statements = 2;
    CHECK(execute(parse("a=1\nanswer=a"), tight).ok());
    CHECK(execute(parse("a=1\nb=2\nanswer=a"), tight).status == ExecStatus::StepLimit);

    const TraceResult tr = trace_all(parse("a=1\nb=2\nc=3"), {}, tight);
    CHECK(tr.status == ExecStatus::StepLimit);
    CHECK(tr.failed_at == 3);
    CHECK(tr.states.size() == 2);
}

TEST_CASE("trace matches the worked example") {
    const Program p = parse("a=1\nb=3\nc=a+b");
    CHECK(trace(p, 3).display() == "{1,3,4}");
    CHECK(trace(p, 2).display() == "{1,3}");
    CHECK(trace(p, 1).display() == "{1}");
    CHECK(trace(p, 0).display() == "{}");
    CHECK(trace(p, 0).key == "");
    CHECK(trace(p, 2).key == "1,3");

    CHECK(trace(parse("x=2\ny=x*x"), 2).display() == "{2,4}");

    CHECK_THROWS_AS(trace(p, 4), InvalidArguments);
    CHECK_THROWS_AS(trace(parse("a=1/0\nb=1"), 1), InvalidArguments);
}

TEST_CASE("trace_all single pass agrees with per-prefix traces") {
    const Program p = parse("a=1\nb=3\nc=a+b");
    const TraceResult tr = trace_all(p);
    REQUIRE(tr.ok());
    REQUIRE(tr.states.size() == 3);
    CHECK(tr.states[0].display() == "{1}");
    CHECK(tr.states[1].display() == "{1,3}");
    CHECK(tr.states[2].display() == "{1,3,4}");
    for (size_t i = 1; i <= 3; ++i) CHECK(tr.states[i - 1].key == trace(p, i).key);

    CHECK(trace_all(Program{}).states.empty());

    const TraceResult err = trace_all(parse("a=1\nb=1/0"));
    CHECK(err.status == ExecStatus::DivisionByZero);
    CHECK(err.failed_at == 2);
    REQUIRE(err.states.size() == 1);
    CHECK(err.states[0].display() == "{1}");
}

TEST_CASE("state semantics") {
    // reassignment: only current bindings count
    CHECK(trace(parse("x=1\nx=2"), 2).display() == "{2}");
    // values sort ascending regardless of definition order
    CHECK(trace(parse("a=5\nb=2"), 2).display() == "{2,5}");
    CHECK(trace(parse("a=3\nb=-1"), 2).display() == "{-1,3}");
    // set semantics collapses duplicates; multiset keeps them
    CHECK(trace(parse("a=1\nb=1"), 2).display() == "{1}");
    StateOptions multi;
    multi.multiset = true;
    CHECK(trace(parse("a=1\nb=1"), 2, multi).display() == "{1,1}");
    CHECK(trace(parse("a=1\nb=1"), 2, multi).key == "1,1");
}

TEST_CASE("quantization to nine significant digits") {
    CHECK(quantize_value(1.0) == "1");
    CHECK(quantize_value(-0.0) == "0");
    CHECK(quantize_value(0.1 + 0.2) == quantize_value(0.3));
    CHECK(quantize_value(1.0 + 1e-12) == quantize_value(1.0));
    CHECK(quantize_value(1.00000002) != quantize_value(1.0));  // 8th decimal survives
    CHECK(quantize_value(123456789.0) == "123456789");
    CHECK(quantize_value(1234567891.0) == quantize_value(1234567891.4));  // 10th digit dropped

    // algebraic reorderings land on the same state key
    CHECK(trace(parse("a=0.1\nb=0.2\nc=a+b"), 3).key == trace(parse("c=0.3\na=0.1\nb=0.2"), 3).key);
}

TEST_CASE("is_correct tolerance") {
    CHECK(is_correct(6.0, 6.0));
    CHECK(is_correct(6.0 + 1e-12, 6.0));
    CHECK(!is_correct(6.0, 8.0));
    CHECK(is_correct(1e6, 1e6 * (1.0 + 0.5e-6)));
    CHECK(!is_correct(1e6, 1e6 * (1.0 + 2.5e-6)));
    CHECK(is_correct(0.0, 0.0));
    CHECK(is_correct(0.0, 5e-7));  // atol floor
    CHECK(!is_correct(0.0, 5e-6));

    Tolerance strict;
    strict.atol = 0.0;
    strict.rtol = 0.0;
    CHECK(is_correct(2.0, 2.0, strict));
    CHECK(!is_correct(2.0, 2.0 + 1e-15, strict));

    const ExecResult ok1{ExecStatus::Ok, 4.0};
    const ExecResult ok2{ExecStatus::Ok, 4.0};
    const ExecResult bad{ExecStatus::DivisionByZero, 4.0};
    CHECK(is_correct(ok1, ok2));
    CHECK(!is_correct(bad, ok2));
    CHECK(!is_correct(ok1, bad));
}

TEST_CASE("states are name-agnostic under consistent renaming") {
    Rng rng(777);
    for (int it = 0; it < 300; ++it) {
        const Program p = test_helpers::random_program(rng, 1, 6);
        const Program r = test_helpers::rename_variables(p, rng, false);
        const TraceResult tp = trace_all(p);
        const TraceResult tr = trace_all(r);
        CAPTURE(pretty_print(p));
        CHECK(tp.status == tr.status);
        CHECK(tp.failed_at == tr.failed_at);
        REQUIRE(tp.states.size() == tr.states.size());
        for (size_t i = 0; i < tp.states.size(); ++i) {
            CHECK(tp.states[i].key == tr.states[i].key);
        }
    }
}
