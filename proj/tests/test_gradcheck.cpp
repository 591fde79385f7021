#include <cmath>
#include <vector>

#include <doctest.h>

#include "gaitma/gradcheck.hpp"
#include "gaitma/gradsuite.hpp"
#include "gaitma/ops.hpp"
#include "gaitma/random.hpp"
#include "test_util.hpp"

using namespace gaitma;
using testutil::rand_tensor;

TEST_CASE("a correct gradient passes every probe") {
    Rng rng(101);
    Tensor x = rand_tensor({3, 4}, rng);
    auto build = [](Tape& tape, const std::vector<Var>& in) {
        return ops::sum_all(ops::mul(in[0], ops::sigmoid(in[0])));
    };
    GradCheckResult r = check_gradients(build, {x});
    CHECK(r.ok());
    CHECK(r.checked == 12);
    CHECK(r.failed == 0);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("a wrong backward closure is caught") {
    Rng rng(102);
    Tensor x = rand_tensor({5}, rng, 0.5, 2.0);
    auto build = [](Tape& tape, const std::vector<Var>& in) {
        Var v = in[0];
        const Tensor& xv = v.value();
        Tensor sq(xv.dims());
        for (std::int64_t i = 0; i < xv.size(); ++i) sq[i] = xv[i] * xv[i];
        // forward x^2 but backward pretends d/dx = 3x
        Var wrong = v.tape->node(std::move(sq), {v.id}, [parent = v.id](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& pv = t.value(parent);
            Tensor& pg = t.grad(parent);
            for (std::int64_t i = 0; i < g.size(); ++i) pg[i] += 3.0 * pv[i] * g[i];
        });
        return ops::sum_all(wrong);
    };
    GradCheckResult r = check_gradients(build, {x});
    CHECK_FALSE(r.ok());
    CHECK(r.failed == 5);
    CHECK_FALSE(r.first_failure.empty());
}

TEST_CASE("probes that cross an activation boundary are skipped, not failed") {
    // relu input inside the finite-difference step: the displaced passes land
    // on different linear pieces, which the signature comparison detects
    Tensor x({3}, {3e-6, 1.0, -2.0});
    auto build = [](Tape& tape, const std::vector<Var>& in) { return ops::sum_all(ops::relu(in[0])); };
    GradCheckResult r = check_gradients(build, {x});
    CHECK(r.failed == 0);
    CHECK(r.skipped == 1);
    CHECK(r.checked == 2);
}

TEST_CASE("probes near a curvature singularity are skipped, not failed") {
    Tensor x({3}, {1e-4, 0.9, 2.0});
    auto build = [](Tape& tape, const std::vector<Var>& in) { return ops::sum_all(ops::sqrt_elem(in[0])); };
    GradCheckResult r = check_gradients(build, {x});
    CHECK(r.failed == 0);
    CHECK(r.skipped == 1);
    CHECK(r.checked == 2);
}

TEST_CASE("probe budget limits the checked count") {
    Rng rng(103);
    Tensor x = rand_tensor({6, 6}, rng);
    auto build = [](Tape& tape, const std::vector<Var>& in) {
        return ops::sum_all(ops::mul(in[0], in[0]));
    };
    GradCheckConfig cfg;
    cfg.probes = 5;
    GradCheckResult r = check_gradients(build, {x}, cfg);
    CHECK(r.checked == 5);
    CHECK(r.ok());
}

TEST_CASE("parameter probing restores the stored values") {
    ParameterStore store;
    Rng rng(104);
    store.add("w", rand_tensor({4, 3}, rng));
    store.add("b", rand_tensor({3}, rng));
    Tensor w_before = store.get("w").value;
    Tensor b_before = store.get("b").value;

    auto build = [&store](Tape& tape) {
        Var w = tape.param(store.get("w"));
        Var b = tape.param(store.get("b"));
        Var x = tape.input(Tensor({2, 4}, {0.3, -0.2, 0.5, 0.9, -0.7, 0.1, 0.4, -0.6}));
        return ops::sum_all(ops::sigmoid(ops::linear(x, w, b)));
    };
    GradCheckResult r = check_param_gradients(build, store);
    CHECK(r.ok());
    CHECK(r.checked == 15);
    CHECK(testutil::max_diff(store.get("w").value, w_before) == 0.0);
    CHECK(testutil::max_diff(store.get("b").value, b_before) == 0.0);
}

TEST_CASE("a result with no checked probes does not count as passing") {
    GradCheckResult r;
    CHECK_FALSE(r.ok());
    r.checked = 1;
    CHECK(r.ok());
    r.failed = 1;
    CHECK_FALSE(r.ok());
}

TEST_CASE("the full gradient suite passes") {
    auto entries = run_gradient_suite(123);
    CHECK(entries.size() >= 25);  // every primitive plus the composed paths
    for (const auto& e : entries) {
        INFO(e.name, ": ", e.result.first_failure);
        CHECK(e.result.ok());
        CHECK(e.result.max_rel_err < 1e-4);
    }
    CHECK(suite_passed(entries));

    bool has_model = false;
    for (const auto& e : entries)
        if (e.name == "composed_model") {
            has_model = true;
            CHECK(e.result.checked >= 200);
        }
    CHECK(has_model);
}
