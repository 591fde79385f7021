#include <benchmark/benchmark.h>

#include "gaitma/ops.hpp"
#include "gaitma/random.hpp"
#include "gaitma/tape.hpp"
#include "gaitma/tensor.hpp"

using namespace gaitma;

static Tensor rand_tensor(std::vector<int> dims, Rng& rng) {
    Tensor t(std::move(dims));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = uniform_real(rng, -1.0, 1.0);
    return t;
}

static void BM_Conv3dForward(benchmark::State& state) {
    Rng rng(5);
    Tensor x = rand_tensor({16, 8, 32, 22}, rng);
    Tensor k = rand_tensor({32, 16, 3, 3, 3}, rng);
    Tensor b = rand_tensor({32}, rng);
    for (auto _ : state) {
        Tape tape;
        Var y = ops::conv3d(tape.input(x), tape.input(k), tape.input(b), 1, 1, 1, 1);
        benchmark::DoNotOptimize(y.value().data());
    }
}
BENCHMARK(BM_Conv3dForward);

static void BM_Conv2dSeqForward(benchmark::State& state) {
    Rng rng(6);
    Tensor x = rand_tensor({29, 8, 32, 22}, rng);
    Tensor k = rand_tensor({16, 29, 3, 3}, rng);
    Tensor b = rand_tensor({16}, rng);
    for (auto _ : state) {
        Tape tape;
        Var y = ops::conv2d_seq(tape.input(x), tape.input(k), tape.input(b), 1, 1);
        benchmark::DoNotOptimize(y.value().data());
    }
}
BENCHMARK(BM_Conv2dSeqForward);

static void BM_MatmulBackward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(7);
    Tensor a = rand_tensor({n, n}, rng);
    Tensor b = rand_tensor({n, n}, rng);
    for (auto _ : state) {
        Tape tape;
        Var va = tape.input(a, true);
        Var y = ops::sum_all(ops::matmul(va, tape.input(b, true)));
        tape.backward(y);
        benchmark::DoNotOptimize(tape.grad(va.id).data());
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(256);
