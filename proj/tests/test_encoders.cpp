#include <cmath>
#include <vector>

#include <doctest.h>

#include "gaitma/encoders.hpp"
#include "gaitma/errors.hpp"
#include "gaitma/random.hpp"
#include "test_util.hpp"

using namespace gaitma;
using testutil::max_diff;
using testutil::rand_tensor;

TEST_CASE("pooled_extent halves with truncation per stage") {
    CHECK(pooled_extent(64, 3) == 8);
    CHECK(pooled_extent(44, 3) == 5);  // 44 -> 22 -> 11 -> 5
    CHECK(pooled_extent(5, 1) == 2);
    CHECK(pooled_extent(7, 2) == 1);
    CHECK(pooled_extent(10, 0) == 10);
}

TEST_CASE("backbone config validation") {
    BackboneConfig cfg;  // 64x44, three stages, 8 parts
    CHECK_NOTHROW(cfg.validate());

    BackboneConfig bad = cfg;
    bad.part_count = 3;  // 8 % 3 != 0
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.sil_stages.clear();
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.sil_height = 4;  // pools away to zero over three stages
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("branch registration creates stage parameters with projection skips") {
    ParameterStore store;
    Rng rng(41);
    register_branch_params(store, "sil", true, 1, {4, 4, 6}, rng);
    CHECK(store.find("sil.stage0.conv1.weight") != nullptr);
    CHECK(store.find("sil.stage0.conv2.bias") != nullptr);
    CHECK(store.find("sil.stage0.skip.weight") != nullptr);   // 1 -> 4 needs projection
    CHECK(store.find("sil.stage1.skip.weight") == nullptr);   // 4 -> 4 is identity
    CHECK(store.find("sil.stage2.skip.weight") != nullptr);   // 4 -> 6

    const Tensor& w0 = store.get("sil.stage0.conv1.weight").value;
    CHECK(w0.dims() == std::vector<int>{4, 1, 3, 3, 3});
    CHECK(store.get("sil.stage0.conv1.bias").value.max_abs() == 0.0);

    ParameterStore ske;
    register_branch_params(ske, "ske", false, 29, {4}, rng);
    CHECK(ske.get("ske.stage0.conv1.weight").value.dims() == std::vector<int>{4, 29, 3, 3});
}

TEST_CASE("branch output shape follows widths and pooling") {
    ParameterStore store;
    Rng rng(42);
    register_branch_params(store, "b", true, 1, {4, 6}, rng);
    Tape tape;
    Var x = tape.input(rand_tensor({1, 3, 12, 8}, rng, 0.0, 1.0));
    Var y = encode_branch(tape, store, "b", true, x, {4, 6});
    CHECK(y.dims() == std::vector<int>{6, 3, 3, 2});

    ParameterStore store2;
    register_branch_params(store2, "b", false, 5, {4, 6}, rng);
    Tape t2;
    Var x2 = t2.input(rand_tensor({5, 3, 12, 8}, rng, 0.0, 1.0));
    CHECK(encode_branch(t2, store2, "b", false, x2, {4, 6}).dims() == std::vector<int>{6, 3, 3, 2});
}

TEST_CASE("all-zero parameters give an all-zero encoding") {
    ParameterStore store;
    Rng rng(43);
    register_branch_params(store, "b", false, 3, {4, 5}, rng);
    for (auto& p : store.all()) p->value.fill(0.0);

    Tape tape;
    Var x = tape.input(rand_tensor({3, 2, 8, 8}, rng));
    Var y = encode_branch(tape, store, "b", false, x, {4, 5});
    CHECK(y.value().max_abs() == 0.0);
}

TEST_CASE("frame-shared branch maps identical frames identically") {
    ParameterStore store;
    Rng rng(44);
    register_branch_params(store, "b", false, 2, {4}, rng);

    Tensor frame = rand_tensor({2, 1, 8, 6}, rng);
    Tensor both({2, 3, 8, 6});
    for (int c = 0; c < 2; ++c)
        for (int t = 0; t < 3; ++t)
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 6; ++j) both.at(c, t, i, j) = frame.at(c, 0, i, j);

    Tape tape;
    Var y = encode_branch(tape, store, "b", false, tape.input(both), {4});
    const Tensor& yv = y.value();
    for (int c = 0; c < yv.dim(0); ++c)
        for (int t = 1; t < 3; ++t)
            for (int i = 0; i < yv.dim(2); ++i)
                for (int j = 0; j < yv.dim(3); ++j) CHECK(yv.at(c, t, i, j) == yv.at(c, 0, i, j));
}

TEST_CASE("horizontal mapping of a constant map doubles the constant") {
    Tape tape;
    Var fmap = tape.input(Tensor::full({3, 2, 8, 5}, 0.75));
    Var y = horizontal_mapping(fmap, 4);
    CHECK(y.dims() == std::vector<int>{2, 4, 3});
    for (std::int64_t i = 0; i < y.value().size(); ++i) CHECK(std::abs(y.value()[i] - 1.5) <= 1e-15);
}

TEST_CASE("horizontal mapping matches a strip-loop recomputation") {
    Rng rng(45);
    const int c = 4, t = 3, h = 7, w = 5, parts = 3;  // strip heights 3, 2, 2
    Tensor fmap = rand_tensor({c, t, h, w}, rng);
    Tape tape;
    Var y = horizontal_mapping(tape.input(fmap), parts);
    CHECK(y.dims() == std::vector<int>{t, parts, c});

    int base = h / parts, rem = h % parts, off = 0;
    for (int p = 0; p < parts; ++p) {
        int len = base + (p < rem ? 1 : 0);
        for (int tt = 0; tt < t; ++tt)
            for (int cc = 0; cc < c; ++cc) {
                double mx = -1e300, sum = 0.0;
                for (int i = off; i < off + len; ++i)
                    for (int j = 0; j < w; ++j) {
                        mx = std::max(mx, fmap.at(cc, tt, i, j));
                        sum += fmap.at(cc, tt, i, j);
                    }
                double expect = mx + sum / (len * w);
                CHECK(std::abs(y.value().at(tt, p, cc) - expect) <= 1e-12);
            }
        off += len;
    }
}

TEST_CASE("horizontal mapping with one part per row") {
    Rng rng(46);
    Tensor fmap = rand_tensor({2, 2, 4, 3}, rng);
    Tape tape;
    Var y = horizontal_mapping(tape.input(fmap), 4);
    CHECK(y.dims() == std::vector<int>{2, 4, 2});
    // each strip is a single row: max+mean over that row only
    for (int tt = 0; tt < 2; ++tt)
        for (int p = 0; p < 4; ++p)
            for (int cc = 0; cc < 2; ++cc) {
                double mx = -1e300, sum = 0.0;
                for (int j = 0; j < 3; ++j) {
                    mx = std::max(mx, fmap.at(cc, tt, p, j));
                    sum += fmap.at(cc, tt, p, j);
                }
                CHECK(std::abs(y.value().at(tt, p, cc) - (mx + sum / 3.0)) <= 1e-13);
            }

    CHECK_THROWS_AS(horizontal_mapping(tape.input(fmap), 5), InvalidArgument);
    CHECK_THROWS_AS(horizontal_mapping(tape.input(Tensor({2, 3, 4})), 2), InvalidArgument);
}

TEST_CASE("temporal aggregation is an elementwise max over frames") {
    Rng rng(47);
    Tensor x = rand_tensor({4, 3, 5}, rng);
    Tape tape;
    Var y = temporal_aggregate(tape.input(x));
    CHECK(y.dims() == std::vector<int>{3, 5});
    for (int p = 0; p < 3; ++p)
        for (int c = 0; c < 5; ++c) {
            double mx = -1e300;
            for (int t = 0; t < 4; ++t) mx = std::max(mx, x.at(t, p, c));
            CHECK(y.value().at(p, c) == mx);
        }

    // single frame passes through
    Tensor one = rand_tensor({1, 3, 5}, rng);
    Tape t1;
    CHECK(max_diff(temporal_aggregate(t1.input(one)).value(), Tensor({3, 5}, {one.data(), one.data() + 15})) == 0.0);
}

TEST_CASE("temporal aggregation ignores frame order and duplication") {
    Rng rng(48);
    Tensor x = rand_tensor({3, 2, 4}, rng);
    Tensor permuted({3, 2, 4});
    const int order[3] = {2, 0, 1};
    Tensor doubled({6, 2, 4});
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 2; ++p)
            for (int c = 0; c < 4; ++c) {
                permuted.at(t, p, c) = x.at(order[t], p, c);
                doubled.at(t, p, c) = x.at(t, p, c);
                doubled.at(t + 3, p, c) = x.at(t, p, c);
            }
    Tape tape;
    Tensor base = temporal_aggregate(tape.input(x)).value();
    CHECK(max_diff(temporal_aggregate(tape.input(permuted)).value(), base) == 0.0);
    CHECK(max_diff(temporal_aggregate(tape.input(doubled)).value(), base) == 0.0);
}

TEST_CASE("part projection multiplies each part by its own weight slab") {
    ParameterStore store;
    Rng rng(49);
    register_part_projection(store, "proj", 3, 4, 2, rng);
    const Tensor& w = store.get("proj.weight").value;
    CHECK(w.dims() == std::vector<int>{3, 4, 2});

    Tensor x = rand_tensor({3, 4}, rng);
    Tape tape;
    Var y = part_projection(tape, store, "proj", tape.input(x));
    CHECK(y.dims() == std::vector<int>{3, 2});
    for (int p = 0; p < 3; ++p)
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += x.at(p, k) * w.at(p, k, j);
            CHECK(std::abs(y.value().at(p, j) - s) <= 1e-13);
        }
}

TEST_CASE("fan-in initialization stays inside its bound") {
    Rng rng(50);
    Tensor w = uniform_fan_in({40, 10}, 25, rng);
    for (std::int64_t i = 0; i < w.size(); ++i) CHECK(std::abs(w[i]) <= 0.2);
    // not degenerate
    CHECK(w.max_abs() > 0.01);
}
