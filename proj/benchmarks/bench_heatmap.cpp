#include <benchmark/benchmark.h>

#include "gaitma/heatmap.hpp"
#include "gaitma/random.hpp"
#include "gaitma/synthgait.hpp"

using namespace gaitma;

static PoseSequence make_sequence(int frames) {
    IdentityParams id = generate_identity(17);
    return render_pose_sequence(id, frames, 0.4);
}

static void BM_StackSequence(benchmark::State& state) {
    const int frames = static_cast<int>(state.range(0));
    PoseSequence seq = make_sequence(frames);
    SkeletonTopology topo = default_topology();
    for (auto _ : state) {
        HeatmapVolume vol = stack_sequence(seq, topo, 2.0, 64, 44);
        benchmark::DoNotOptimize(vol.values.data());
    }
    state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(BM_StackSequence)->Arg(8)->Arg(30);

static void BM_ReferenceStackSequence(benchmark::State& state) {
    const int frames = static_cast<int>(state.range(0));
    PoseSequence seq = make_sequence(frames);
    SkeletonTopology topo = default_topology();
    for (auto _ : state) {
        HeatmapVolume vol = reference_stack_sequence(seq, topo, 2.0, 64, 44);
        benchmark::DoNotOptimize(vol.values.data());
    }
    state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(BM_ReferenceStackSequence)->Arg(8);

static void BM_RasterizeSilhouette(benchmark::State& state) {
    IdentityParams id = generate_identity(17);
    PoseSequence seq = render_pose_sequence(id, 1, 0.4);
    for (auto _ : state) {
        Tensor sil = rasterize_silhouette(seq[0], id, 64, 44);
        benchmark::DoNotOptimize(sil.data());
    }
}
BENCHMARK(BM_RasterizeSilhouette);
