#include <cmath>
#include <vector>

#include <doctest.h>

#include "gaitma/losses.hpp"
#include "gaitma/random.hpp"
#include "test_util.hpp"

using namespace gaitma;
using testutil::rand_tensor;

TEST_CASE("gaussian estimate hand case") {
    Tensor f({2, 1}, {0.0, 2.0});
    GaussianStats st = estimate_gaussian(f);
    CHECK(st.mu.at(0) == 1.0);
    CHECK(st.sigma_diag.at(0) == 1.0);  // population variance
}

TEST_CASE("gaussian estimate of identical rows has zero variance") {
    Tensor f({4, 3});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) f.at(i, j) = 2.5 * j - 1.0;
    GaussianStats st = estimate_gaussian(f);
    for (int j = 0; j < 3; ++j) {
        CHECK(st.mu.at(j) == 2.5 * j - 1.0);
        CHECK(st.sigma_diag.at(j) == 0.0);
    }
}

TEST_CASE("gaussian estimate matches a two-pass recomputation") {
    Rng rng(91);
    Tensor f = rand_tensor({7, 5}, rng, -3.0, 3.0);
    GaussianStats st = estimate_gaussian(f);
    for (int j = 0; j < 5; ++j) {
        double mean = 0.0;
        for (int i = 0; i < 7; ++i) mean += f.at(i, j);
        mean /= 7.0;
        double var = 0.0;
        for (int i = 0; i < 7; ++i) var += (f.at(i, j) - mean) * (f.at(i, j) - mean);
        var /= 7.0;
        CHECK(std::abs(st.mu.at(j) - mean) <= 1e-12);
        CHECK(std::abs(st.sigma_diag.at(j) - var) <= 1e-12);
    }
}

TEST_CASE("gaussian estimate needs two samples") {
    CHECK_THROWS_AS(estimate_gaussian(Tensor({1, 4})), InvalidArgument);
    CHECK_THROWS_AS(estimate_gaussian(Tensor({4})), InvalidArgument);
}

TEST_CASE("distribution distance hand cases") {
    GaussianStats a{Tensor({1}, {0.0}), Tensor({1}, {1.0})};
    GaussianStats b{Tensor({1}, {1.0}), Tensor({1}, {1.0})};
    CHECK(wasserstein_loss(a, b) == 1.0);  // unit mean shift, equal spread

    GaussianStats c{Tensor({1}, {0.0}), Tensor({1}, {4.0})};
    GaussianStats d{Tensor({1}, {0.0}), Tensor({1}, {1.0})};
    CHECK(wasserstein_loss(c, d) == 1.0);  // (sqrt(4) - sqrt(1))^2

    CHECK(wasserstein_loss(a, a) == 0.0);

    GaussianStats neg{Tensor({1}, {0.0}), Tensor({1}, {-0.5})};
    CHECK_THROWS_AS(wasserstein_loss(a, neg), InvalidArgument);
    GaussianStats wrong{Tensor({2}), Tensor({2})};
    CHECK_THROWS_AS(wasserstein_loss(a, wrong), InvalidArgument);
}

TEST_CASE("distribution distance is a symmetric non-negative divergence") {
    Rng rng(92);
    for (int trial = 0; trial < 50; ++trial) {
        GaussianStats a{rand_tensor({4}, rng, -2, 2), rand_tensor({4}, rng, 0.0, 3.0)};
        GaussianStats b{rand_tensor({4}, rng, -2, 2), rand_tensor({4}, rng, 0.0, 3.0)};
        double ab = wasserstein_loss(a, b);
        CHECK(ab >= 0.0);
        CHECK(std::abs(ab - wasserstein_loss(b, a)) <= 1e-12);
    }
    // zero exactly when the statistics agree
    GaussianStats s{Tensor({3}, {1, 2, 3}), Tensor({3}, {0.5, 1.5, 2.5})};
    CHECK(wasserstein_loss(s, s) == 0.0);
}

TEST_CASE("differentiable distance equals the closed form on the estimates") {
    Rng rng(93);
    Tensor f1 = rand_tensor({6, 4}, rng);
    Tensor f2 = rand_tensor({6, 4}, rng);
    Tape tape;
    double got = wasserstein_between(tape, tape.input(f1), tape.input(f2)).scalar();
    double expect = wasserstein_loss(estimate_gaussian(f1), estimate_gaussian(f2));
    CHECK(std::abs(got - expect) <= 1e-12);
}

TEST_CASE("identical feature batches have zero distance") {
    Rng rng(94);
    Tensor f = rand_tensor({5, 3}, rng);
    Tape tape;
    CHECK(wasserstein_between(tape, tape.input(f), tape.input(f)).scalar() == 0.0);
}

TEST_CASE("grouped distance averages the per-identity distances") {
    Rng rng(95);
    Tensor f1 = rand_tensor({6, 3}, rng);
    Tensor f2 = rand_tensor({6, 3}, rng);
    std::vector<int> labels = {4, 4, 4, 9, 9, 9};

    Tape tape;
    Var v1 = tape.input(f1), v2 = tape.input(f2);
    double got = wasserstein_grouped(tape, v1, v2, labels, true).scalar();

    auto block = [&](const Tensor& t, int r0, int rows) {
        Tensor out({rows, 3});
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < 3; ++j) out.at(i, j) = t.at(r0 + i, j);
        return out;
    };
    double expect = 0.5 * (wasserstein_loss(estimate_gaussian(block(f1, 0, 3)), estimate_gaussian(block(f2, 0, 3))) +
                           wasserstein_loss(estimate_gaussian(block(f1, 3, 3)), estimate_gaussian(block(f2, 3, 3))));
    CHECK(std::abs(got - expect) <= 1e-12);

    // whole-batch mode ignores the labels
    double whole = wasserstein_grouped(tape, v1, v2, labels, false).scalar();
    CHECK(std::abs(whole - wasserstein_loss(estimate_gaussian(f1), estimate_gaussian(f2))) <= 1e-12);
}

TEST_CASE("grouped distance requires usable identity blocks") {
    Rng rng(96);
    Tensor f1 = rand_tensor({3, 2}, rng);
    Tensor f2 = rand_tensor({3, 2}, rng);
    Tape tape;
    Var v1 = tape.input(f1), v2 = tape.input(f2);
    // a singleton group cannot produce a variance
    CHECK_THROWS_AS(wasserstein_grouped(tape, v1, v2, {0, 0, 1}, true), InvalidArgument);
    CHECK_THROWS_AS(wasserstein_grouped(tape, v1, v2, {0, 0}, true), InvalidArgument);
}

TEST_CASE("joint objective weights the three terms") {
    Tape tape;
    Var one_tri = tape.input(Tensor::scalar(1.0));
    Var one_ce = tape.input(Tensor::scalar(1.0));
    Var one_w = tape.input(Tensor::scalar(1.0));
    LossWeights w;  // 1.0, 0.1, 0.1
    CHECK(std::abs(joint_loss(one_tri, one_ce, one_w, w).scalar() - 1.2) <= 1e-15);

    LossWeights w2{0.5, 2.0, 3.0};
    Var a = tape.input(Tensor::scalar(2.0));
    Var b = tape.input(Tensor::scalar(-1.0));
    Var c = tape.input(Tensor::scalar(0.25));
    CHECK(std::abs(joint_loss(a, b, c, w2).scalar() - (1.0 - 2.0 + 0.75)) <= 1e-15);

    LossWeights bad{-1.0, 0.1, 0.1};
    CHECK_THROWS_AS(joint_loss(a, b, c, bad), InvalidArgument);
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
