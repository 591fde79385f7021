#include <cmath>
#include <vector>

#include <doctest.h>

#include "gaitma/fusion.hpp"
#include "gaitma/ops.hpp"
#include "gaitma/random.hpp"
#include "test_util.hpp"

using namespace gaitma;
using testutil::max_diff;
using testutil::rand_tensor;

TEST_CASE("co-attention parameter shapes follow the bottleneck ratio") {
    ParameterStore store;
    Rng rng(61);
    register_cam_params(store, "cam", 8, 4, rng);
    CHECK(store.get("cam.w1").value.dims() == std::vector<int>{16, 4});
    CHECK(store.get("cam.b1").value.dims() == std::vector<int>{4});
    CHECK(store.get("cam.w2").value.dims() == std::vector<int>{4, 16});
    CHECK(store.get("cam.b2").value.dims() == std::vector<int>{16});

    ParameterStore bad;
    CHECK_THROWS_AS(register_cam_params(bad, "cam", 8, 5, rng), InvalidArgument);
}

TEST_CASE("zero-weight co-attention gates at one half") {
    // relu(0)*w2 + 0 scores 0, sigmoid gives 0.5, so the residual output is
    // exactly 1.5x the concatenated input
    ParameterStore store;
    Rng rng(62);
    register_cam_params(store, "cam", 6, 4, rng);
    for (auto& p : store.all()) p->value.fill(0.0);

    Tensor s = rand_tensor({3, 6}, rng);
    Tensor k = rand_tensor({3, 6}, rng);
    Tape tape;
    Var out = cam_forward(tape, store, "cam", tape.input(s), tape.input(k));
    CHECK(out.dims() == std::vector<int>{3, 12});
    for (int p = 0; p < 3; ++p)
        for (int j = 0; j < 6; ++j) {
            CHECK(std::abs(out.value().at(p, j) - 1.5 * s.at(p, j)) <= 1e-12);
            CHECK(std::abs(out.value().at(p, 6 + j) - 1.5 * k.at(p, j)) <= 1e-12);
        }
}

TEST_CASE("co-attention of zero features is zero") {
    ParameterStore store;
    Rng rng(63);
    register_cam_params(store, "cam", 4, 4, rng);
    Tape tape;
    Var out = cam_forward(tape, store, "cam", tape.input(Tensor({2, 4})), tape.input(Tensor({2, 4})));
    CHECK(out.value().max_abs() == 0.0);
}

TEST_CASE("residual gate keeps positive features between 1x and 2x") {
    ParameterStore store;
    Rng rng(64);
    register_cam_params(store, "cam", 5, 2, rng);

    Tensor s = rand_tensor({4, 5}, rng, 0.05, 1.0);
    Tensor k = rand_tensor({4, 5}, rng, 0.05, 1.0);
    Tape tape;
    Var out = cam_forward(tape, store, "cam", tape.input(s), tape.input(k));
    for (int p = 0; p < 4; ++p)
        for (int j = 0; j < 10; ++j) {
            double y = j < 5 ? s.at(p, j) : k.at(p, j - 5);
            CHECK(out.value().at(p, j) > y);
            CHECK(out.value().at(p, j) < 2.0 * y);
        }
}

TEST_CASE("co-attention scores every part with the same two layers") {
    ParameterStore store;
    Rng rng(65);
    register_cam_params(store, "cam", 4, 2, rng);

    // rows 0 and 2 of the concatenated input coincide, so their gated outputs must too
    Tensor s = rand_tensor({3, 4}, rng);
    Tensor k = rand_tensor({3, 4}, rng);
    for (int j = 0; j < 4; ++j) {
        s.at(2, j) = s.at(0, j);
        k.at(2, j) = k.at(0, j);
    }
    Tape tape;
    Var out = cam_forward(tape, store, "cam", tape.input(s), tape.input(k));
    for (int j = 0; j < 8; ++j) CHECK(out.value().at(2, j) == out.value().at(0, j));
}

TEST_CASE("co-attention matches a from-scratch recomputation") {
    ParameterStore store;
    Rng rng(66);
    const int p = 3, c = 4, r = 2;
    register_cam_params(store, "cam", c, r, rng);
    Tensor s = rand_tensor({p, c}, rng);
    Tensor k = rand_tensor({p, c}, rng);

    Tape tape;
    Var out = cam_forward(tape, store, "cam", tape.input(s), tape.input(k));

    const Tensor& w1 = store.get("cam.w1").value;
    const Tensor& b1 = store.get("cam.b1").value;
    const Tensor& w2 = store.get("cam.w2").value;
    const Tensor& b2 = store.get("cam.b2").value;
    const int c2 = 2 * c, mid = c2 / r;
    for (int i = 0; i < p; ++i) {
        std::vector<double> ym(static_cast<std::size_t>(c2));
        for (int j = 0; j < c; ++j) {
            ym[static_cast<std::size_t>(j)] = s.at(i, j);
            ym[static_cast<std::size_t>(c + j)] = k.at(i, j);
        }
        std::vector<double> h(static_cast<std::size_t>(mid));
        for (int m = 0; m < mid; ++m) {
            double acc = b1.at(m);
            for (int j = 0; j < c2; ++j) acc += ym[static_cast<std::size_t>(j)] * w1.at(j, m);
            h[static_cast<std::size_t>(m)] = std::max(0.0, acc);
        }
        for (int j = 0; j < c2; ++j) {
            double acc = b2.at(j);
            for (int m = 0; m < mid; ++m) acc += h[static_cast<std::size_t>(m)] * w2.at(m, j);
            double gate = 1.0 / (1.0 + std::exp(-acc));
            double expect = gate * ym[static_cast<std::size_t>(j)] + ym[static_cast<std::size_t>(j)];
            CHECK(std::abs(out.value().at(i, j) - expect) <= 1e-12);
        }
    }
}

static Tensor layer_norm_oracle(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5) {
    int n = x.dim(0), m = x.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int j = 0; j < m; ++j) mean += x.at(i, j);
        mean /= m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
        var /= m;
        for (int j = 0; j < m; ++j) out.at(i, j) = (x.at(i, j) - mean) / std::sqrt(var + eps) * gain.at(j) + shift.at(j);
    }
    return out;
}

TEST_CASE("mutual refinement with a zero partner reduces to layer norm") {
    ParameterStore store;
    Rng rng(67);
    const int p = 3, c = 5;
    register_mlm_params(store, "mlm", c, rng);
    // perturb the affines so the test sees them being applied
    for (auto& prm : store.all())
        for (std::int64_t i = 0; i < prm->value.size(); ++i) prm->value[i] += uniform_real(rng, -0.2, 0.2);

    Tensor y1 = rand_tensor({p, c}, rng);
    Tape tape;
    MlmOut out = mlm_forward(tape, store, "mlm", tape.input(y1), tape.input(Tensor({p, c})));

    // direction 1 attends over zeros: mixed = y1
    Tensor expect1 = layer_norm_oracle(y1, store.get("mlm.ln1.gain").value, store.get("mlm.ln1.shift").value);
    CHECK(max_diff(out.y1.value(), expect1) <= 1e-12);

    // direction 2 queries with zeros: uniform attention over the rows of y1
    Tensor mixed2({p, c});
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < c; ++j) {
            double avg = 0.0;
            for (int q = 0; q < p; ++q) avg += y1.at(q, j);
            mixed2.at(i, j) = avg / p;
        }
    Tensor expect2 = layer_norm_oracle(mixed2, store.get("mlm.ln2.gain").value, store.get("mlm.ln2.shift").value);
    CHECK(max_diff(out.y2.value(), expect2) <= 1e-12);
}

TEST_CASE("single-part mutual refinement adds the partner directly") {
    ParameterStore store;
    Rng rng(68);
    const int c = 6;
    register_mlm_params(store, "mlm", c, rng);
    Tensor y1 = rand_tensor({1, c}, rng);
    Tensor y2 = rand_tensor({1, c}, rng);

    Tape tape;
    MlmOut out = mlm_forward(tape, store, "mlm", tape.input(y1), tape.input(y2));

    Tensor sum({1, c});
    for (int j = 0; j < c; ++j) sum.at(0, j) = y1.at(0, j) + y2.at(0, j);
    CHECK(max_diff(out.y1.value(), layer_norm_oracle(sum, store.get("mlm.ln1.gain").value,
                                                     store.get("mlm.ln1.shift").value)) <= 1e-12);
}

static Tensor mlm_direction_oracle(const Tensor& q, const Tensor& v, const Tensor& gain, const Tensor& shift,
                                   double d) {
    int p = q.dim(0), c = q.dim(1);
    Tensor mixed({p, c});
    for (int i = 0; i < p; ++i) {
        std::vector<double> scores(static_cast<std::size_t>(p));
        double mx = -1e300;
        for (int r = 0; r < p; ++r) {
            double s = 0.0;
            for (int j = 0; j < c; ++j) s += q.at(i, j) * v.at(r, j);
            scores[static_cast<std::size_t>(r)] = s / std::sqrt(d);
            mx = std::max(mx, scores[static_cast<std::size_t>(r)]);
        }
        double z = 0.0;
        for (double& s : scores) {
            s = std::exp(s - mx);
            z += s;
        }
        for (int j = 0; j < c; ++j) {
            double acc = 0.0;
            for (int r = 0; r < p; ++r) acc += scores[static_cast<std::size_t>(r)] / z * v.at(r, j);
            mixed.at(i, j) = acc + q.at(i, j);
        }
    }
    return layer_norm_oracle(mixed, gain, shift);
}

TEST_CASE("mutual refinement matches the attention recomputation") {
    ParameterStore store;
    Rng rng(69);
    const int p = 4, c = 6;
    register_mlm_params(store, "mlm", c, rng);
    for (auto& prm : store.all())
        for (std::int64_t i = 0; i < prm->value.size(); ++i) prm->value[i] += uniform_real(rng, -0.3, 0.3);

    Tensor y1 = rand_tensor({p, c}, rng);
    Tensor y2 = rand_tensor({p, c}, rng);
    // scale one input so the default attention denominator sqrt(C) is exercised
    for (std::int64_t i = 0; i < y1.size(); ++i) y1[i] *= 1.7;

    Tape tape;
    MlmOut out = mlm_forward(tape, store, "mlm", tape.input(y1), tape.input(y2));
    CHECK(max_diff(out.y1.value(), mlm_direction_oracle(y1, y2, store.get("mlm.ln1.gain").value,
                                                        store.get("mlm.ln1.shift").value, c)) <= 1e-12);
    CHECK(max_diff(out.y2.value(), mlm_direction_oracle(y2, y1, store.get("mlm.ln2.gain").value,
                                                        store.get("mlm.ln2.shift").value, c)) <= 1e-12);

    // explicit scale overrides the default
    Tape t2;
    MlmOut out2 = mlm_forward(t2, store, "mlm", t2.input(y1), t2.input(y2), 2.5);
    CHECK(max_diff(out2.y1.value(), mlm_direction_oracle(y1, y2, store.get("mlm.ln1.gain").value,
                                                         store.get("mlm.ln1.shift").value, 2.5)) <= 1e-12);
    CHECK(max_diff(out.y1.value(), out2.y1.value()) > 1e-6);  // the scale matters
}

TEST_CASE("mutual refinement is symmetric under swapping the directions") {
    ParameterStore store;
    Rng rng(70);
    const int c = 5;
    register_mlm_params(store, "mlm", c, rng);
    // make both direction affines identical so a swap is a pure relabeling
    store.get("mlm.ln2.gain").value = store.get("mlm.ln1.gain").value;
    store.get("mlm.ln2.shift").value = store.get("mlm.ln1.shift").value;

    Tensor y1 = rand_tensor({3, c}, rng);
    Tensor y2 = rand_tensor({3, c}, rng);
    Tape tape;
    MlmOut fwd = mlm_forward(tape, store, "mlm", tape.input(y1), tape.input(y2));
    MlmOut rev = mlm_forward(tape, store, "mlm", tape.input(y2), tape.input(y1));
    CHECK(max_diff(fwd.y1.value(), rev.y2.value()) == 0.0);
    CHECK(max_diff(fwd.y2.value(), rev.y1.value()) == 0.0);
}

TEST_CASE("fused output concatenates per part and splits back") {
    Rng rng(71);
    Tensor y1 = rand_tensor({4, 3}, rng);
    Tensor y2 = rand_tensor({4, 3}, rng);
    Tape tape;
    Var fused = fuse_output(tape.input(y1), tape.input(y2));
    CHECK(fused.dims() == std::vector<int>{4, 6});
    auto parts = ops::split(fused, 1, {3, 3});
    CHECK(max_diff(parts[0].value(), y1) == 0.0);
    CHECK(max_diff(parts[1].value(), y2) == 0.0);
}

TEST_CASE("shape mismatches are rejected") {
    ParameterStore store;
    Rng rng(72);
    register_cam_params(store, "cam", 4, 2, rng);
    register_mlm_params(store, "mlm", 4, rng);
    Tape tape;
    Var a = tape.input(Tensor({2, 4}));
    Var b = tape.input(Tensor({3, 4}));
    CHECK_THROWS_AS(cam_forward(tape, store, "cam", a, b), InvalidArgument);
    CHECK_THROWS_AS(mlm_forward(tape, store, "mlm", a, b), InvalidArgument);
    CHECK_THROWS_AS(mlm_forward(tape, store, "mlm", a, a, -1.0), InvalidArgument);
}
