#include <benchmark/benchmark.h>

#include <vector>

#include "gaitma/eval.hpp"
#include "gaitma/random.hpp"

using namespace gaitma;

static std::vector<EmbeddingRecord> make_records(int count, int dim, int identities, Rng& rng, int id_base) {
    std::vector<EmbeddingRecord> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        EmbeddingRecord r;
        r.id = id_base + i;
        r.label = i % identities;
        r.embedding.resize(static_cast<std::size_t>(dim));
        for (double& v : r.embedding) v = uniform_real(rng, -1.0, 1.0) + 0.5 * r.label;
        out.push_back(std::move(r));
    }
    return out;
}

static void BM_EvaluateEmbeddings(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(9);
    auto gallery = make_records(n, 256, 16, rng, 0);
    auto probes = make_records(n, 256, 16, rng, 100000);
    for (auto _ : state) {
        EvalReport rep = evaluate_embeddings(gallery, probes);
        benchmark::DoNotOptimize(rep.map);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EvaluateEmbeddings)->Arg(64)->Arg(256);

static void BM_PairwiseDistances(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(10);
    Tensor probes({n, 256});
    Tensor gallery({n, 256});
    for (std::int64_t i = 0; i < probes.size(); ++i) probes[i] = uniform_real(rng, -1.0, 1.0);
    for (std::int64_t i = 0; i < gallery.size(); ++i) gallery[i] = uniform_real(rng, -1.0, 1.0);
    for (auto _ : state) {
        Tensor d = pairwise_distances(probes, gallery);
        benchmark::DoNotOptimize(d.data());
    }
}
BENCHMARK(BM_PairwiseDistances)->Arg(128);
