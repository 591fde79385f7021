#include "gaitma/gradsuite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <utility>

#include "gaitma/encoders.hpp"
#include "gaitma/fusion.hpp"
#include "gaitma/losses.hpp"
#include "gaitma/model.hpp"
#include "gaitma/ops.hpp"
#include "gaitma/random.hpp"

namespace gaitma {
namespace {

Tensor rand_tensor(std::vector<int> dims, Rng& rng, double lo, double hi) {
    Tensor t(std::move(dims));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = uniform_real(rng, lo, hi);
    return t;
}

/// Dot with a fixed coefficient tensor so every output element reaches the
/// scalar objective with a distinct weight; a plain sum would let equal and
/// opposite gradient errors cancel.
Var weighted(Tape& t, Var x, const Tensor& w) { return ops::sum_all(ops::mul(x, t.input(w))); }

struct SuiteRunner {
    std::vector<SuiteEntry> entries;

    void run(const std::string& name, const std::function<GradCheckResult()>& fn) {
        auto t0 = std::chrono::steady_clock::now();
        SuiteEntry e;
        e.name = name;
        e.result = fn();
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        entries.push_back(std::move(e));
    }
};

/// Same class-distinct input pattern the training smoke uses: class 0 gets
/// vertical stripes, class 1 horizontal, heatmaps carry a per-sample phase.
/// This keeps the batch embeddings spread out so the triplet and alignment
/// terms have healthy gradients at toy widths.
GaitMAModel::SampleInput structured_sample(int cls, int idx, int channels, int frames, int h, int w, Rng& rng) {
    GaitMAModel::SampleInput s;
    s.silhouette = Tensor({1, frames, h, w});
    for (int t = 0; t < frames; ++t)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                bool on = cls == 0 ? ((c + idx + t) % 3 == 0) : ((r + idx) % 2 == 0);
                s.silhouette.at(0, t, r, c) = on ? 1.0 : 0.0;
            }
    s.heatmaps = Tensor({channels, frames, h, w});
    for (int k = 0; k < channels; ++k)
        for (int t = 0; t < frames; ++t)
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    double base = cls == 0 ? (c + 1) / static_cast<double>(w) : (r + 1) / static_cast<double>(h);
                    double phase = 0.25 * idx + 0.1 * k;
                    s.heatmaps.at(k, t, r, c) = base * (0.7 + 0.2 * std::sin(phase + r * 0.3 + c * 0.5)) +
                                                0.05 * uniform_real(rng, -1.0, 1.0);
                }
    return s;
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(std::uint64_t seed) {
    SuiteRunner sr;
    GradCheckConfig gc;

    {
        Rng rng(mix_seed(seed, 1));
        Tensor a = rand_tensor({3, 4}, rng, -2.0, 2.0);
        Tensor b = rand_tensor({3, 4}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({3, 4}, rng, -1.0, 1.0);
        sr.run("elementwise_arithmetic", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                Var prod = ops::mul(ops::add(in[0], in[1]), ops::sub(in[0], in[1]));
                return weighted(t, ops::scale(prod, 1.7), w);
            };
            return check_gradients(build, {a, b}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 2));
        Tensor x = rand_tensor({4, 5}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({4, 5}, rng, -1.0, 1.0);
        sr.run("relu", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) { return weighted(t, ops::relu(in[0]), w); };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 3));
        Tensor x = rand_tensor({4, 5}, rng, -3.0, 3.0);
        Tensor w = rand_tensor({4, 5}, rng, -1.0, 1.0);
        sr.run("sigmoid", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) { return weighted(t, ops::sigmoid(in[0]), w); };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 4));
        Tensor x = rand_tensor({3, 6}, rng, 0.4, 2.5);
        Tensor w = rand_tensor({3, 6}, rng, -1.0, 1.0);
        sr.run("sqrt", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) { return weighted(t, ops::sqrt_elem(in[0]), w); };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 5));
        Tensor x = rand_tensor({3, 8}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({4, 6}, rng, -1.0, 1.0);
        sr.run("reshape_transpose", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::transpose(ops::reshape(in[0], {6, 4})), w);
            };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 6));
        Tensor a = rand_tensor({3, 4}, rng, -1.5, 1.5);
        Tensor b = rand_tensor({4, 5}, rng, -1.5, 1.5);
        Tensor w = rand_tensor({3, 5}, rng, -1.0, 1.0);
        sr.run("matmul", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) { return weighted(t, ops::matmul(in[0], in[1]), w); };
            return check_gradients(build, {a, b}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 7));
        Tensor a = rand_tensor({3, 4}, rng, -1.5, 1.5);
        Tensor b = rand_tensor({5, 4}, rng, -1.5, 1.5);
        Tensor w = rand_tensor({3, 5}, rng, -1.0, 1.0);
        sr.run("matmul_transposed", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::matmul(in[0], in[1], true), w);
            };
            return check_gradients(build, {a, b}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 8));
        Tensor x = rand_tensor({3, 4}, rng, -1.5, 1.5);
        Tensor wt = rand_tensor({4, 5}, rng, -1.0, 1.0);
        Tensor bias = rand_tensor({5}, rng, -0.5, 0.5);
        Tensor w = rand_tensor({3, 5}, rng, -1.0, 1.0);
        sr.run("linear", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::linear(in[0], in[1], in[2]), w);
            };
            return check_gradients(build, {x, wt, bias}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 9));
        Tensor x = rand_tensor({4, 6}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({4, 6}, rng, -1.0, 1.0);
        sr.run("softmax_rows", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) { return weighted(t, ops::softmax_rows(in[0]), w); };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 10));
        Tensor x = rand_tensor({4, 6}, rng, -1.5, 1.5);
        Tensor gain = rand_tensor({6}, rng, 0.5, 1.5);
        Tensor shift = rand_tensor({6}, rng, -0.5, 0.5);
        Tensor w = rand_tensor({4, 6}, rng, -1.0, 1.0);
        sr.run("layer_norm", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::layer_norm(in[0], in[1], in[2]), w);
            };
            return check_gradients(build, {x, gain, shift}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 11));
        Tensor x = rand_tensor({5, 4}, rng, -1.5, 1.5);
        Tensor wm = rand_tensor({4}, rng, -1.0, 1.0);
        Tensor wv = rand_tensor({4}, rng, -1.0, 1.0);
        sr.run("column_stats", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return ops::add(weighted(t, ops::column_mean(in[0]), wm), weighted(t, ops::column_var(in[0]), wv));
            };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 12));
        Tensor a = rand_tensor({2, 3}, rng, -1.5, 1.5);
        Tensor b = rand_tensor({2, 3}, rng, -1.5, 1.5);
        Tensor w1 = rand_tensor({4, 1}, rng, -1.0, 1.0);
        Tensor w2 = rand_tensor({2, 2}, rng, -1.0, 1.0);
        sr.run("concat_split_slice", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                Var cat = ops::concat({in[0], in[1]}, 0);               // 4x3
                auto parts = ops::split(cat, 1, {1, 2});                // 4x1, 4x2
                Var sl = ops::slice(parts[1], 0, 1, 2);                 // 2x2
                return ops::add(weighted(t, parts[0], w1), weighted(t, sl, w2));
            };
            return check_gradients(build, {a, b}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 13));
        Tensor x = rand_tensor({2, 2, 6, 6}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({2, 2, 3, 3}, rng, -1.0, 1.0);
        sr.run("pool_max", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::pool(in[0], ops::PoolKind::kMax, {2, 3}, 2), w);
            };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 14));
        Tensor x = rand_tensor({4, 6}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({2, 6}, rng, -1.0, 1.0);
        sr.run("pool_mean", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::pool(in[0], ops::PoolKind::kMean, {0}, 2), w);
            };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 15));
        Tensor x = rand_tensor({3, 7, 5}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({3, 3, 2}, rng, -1.0, 1.0);
        sr.run("pool_truncation", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::pool(in[0], ops::PoolKind::kMax, {1, 2}, 2, true), w);
            };
            return check_gradients(build, {x}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 16));
        Tensor x = rand_tensor({2, 3, 5, 4}, rng, -1.0, 1.0);
        Tensor k = rand_tensor({3, 2, 3, 3, 3}, rng, -0.5, 0.5);
        Tensor bias = rand_tensor({3}, rng, -0.3, 0.3);
        Tensor w = rand_tensor({3, 3, 5, 4}, rng, -1.0, 1.0);
        sr.run("conv3d", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::conv3d(in[0], in[1], in[2], 1, 1, 1, 1), w);
            };
            return check_gradients(build, {x, k, bias}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 17));
        Tensor x = rand_tensor({2, 3, 5, 5}, rng, -1.0, 1.0);
        Tensor k = rand_tensor({3, 2, 3, 3, 3}, rng, -0.5, 0.5);
        Tensor bias = rand_tensor({3}, rng, -0.3, 0.3);
        Tensor w = rand_tensor({3, 2, 3, 3}, rng, -1.0, 1.0);
        sr.run("conv3d_strided", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::conv3d(in[0], in[1], in[2], 2, 2, 1, 1), w);
            };
            return check_gradients(build, {x, k, bias}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 18));
        Tensor x = rand_tensor({2, 3, 4, 4}, rng, -1.0, 1.0);
        Tensor k = rand_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
        Tensor bias = rand_tensor({3}, rng, -0.3, 0.3);
        Tensor w = rand_tensor({3, 3, 4, 4}, rng, -1.0, 1.0);
        sr.run("conv2d_per_frame", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::conv2d_seq(in[0], in[1], in[2], 1, 1), w);
            };
            return check_gradients(build, {x, k, bias}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 19));
        Tensor x = rand_tensor({2, 5, 5}, rng, -1.0, 1.0);
        Tensor k = rand_tensor({4, 2, 3, 3}, rng, -0.5, 0.5);
        Tensor bias = rand_tensor({4}, rng, -0.3, 0.3);
        Tensor w = rand_tensor({4, 3, 3}, rng, -1.0, 1.0);
        sr.run("conv2d", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::conv2d(in[0], in[1], in[2], 2, 1), w);
            };
            return check_gradients(build, {x, k, bias}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 20));
        Tensor x = rand_tensor({3, 4}, rng, -1.5, 1.5);
        Tensor slabs = rand_tensor({3, 4, 2}, rng, -1.0, 1.0);
        Tensor w = rand_tensor({3, 2}, rng, -1.0, 1.0);
        sr.run("part_linear", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, ops::part_linear(in[0], in[1]), w);
            };
            return check_gradients(build, {x, slabs}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 21));
        Tensor logits = rand_tensor({4, 3}, rng, -2.0, 2.0);
        std::vector<int> labels = {0, 2, 1, 2};
        sr.run("cross_entropy", [&] {
            auto build = [&](Tape&, const std::vector<Var>& in) {
                return ops::softmax_cross_entropy(in[0], labels);
            };
            return check_gradients(build, {logits}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 22));
        Tensor emb = rand_tensor({6, 4}, rng, -1.0, 1.0);
        std::vector<int> labels = {0, 0, 1, 1, 2, 2};
        sr.run("triplet", [&] {
            auto build = [&](Tape&, const std::vector<Var>& in) {
                return ops::triplet_batch_all(in[0], labels, 0.2);
            };
            return check_gradients(build, {emb}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 23));
        Tensor f1 = rand_tensor({6, 3}, rng, -1.0, 1.0);
        Tensor f2 = rand_tensor({6, 3}, rng, -1.0, 1.0);
        sr.run("wasserstein_batch", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return wasserstein_between(t, in[0], in[1]);
            };
            return check_gradients(build, {f1, f2}, gc);
        });
    }
    {
        Rng rng(mix_seed(seed, 24));
        Tensor f1 = rand_tensor({6, 3}, rng, -1.0, 1.0);
        Tensor f2 = rand_tensor({6, 3}, rng, -1.0, 1.0);
        std::vector<int> labels = {0, 0, 0, 1, 1, 1};
        sr.run("wasserstein_per_identity", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return wasserstein_grouped(t, in[0], in[1], labels, true);
            };
            return check_gradients(build, {f1, f2}, gc);
        });
    }

    // Fusion blocks: one pass probing their parameters, one probing the
    // incoming part features, so both gradient routes are exercised.
    {
        Rng init(mix_seed(seed, 25));
        ParameterStore store;
        register_cam_params(store, "cam", 6, 4, init);
        Rng rng(mix_seed(seed, 26));
        Tensor ys = rand_tensor({3, 6}, rng, -1.0, 1.0);
        Tensor yk = rand_tensor({3, 6}, rng, -1.0, 1.0);
        Tensor w = rand_tensor({3, 12}, rng, -1.0, 1.0);
        sr.run("cam_params", [&] {
            auto build = [&](Tape& t) {
                return weighted(t, cam_forward(t, store, "cam", t.input(ys), t.input(yk)), w);
            };
            return check_param_gradients(build, store, gc);
        });
        sr.run("cam_inputs", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                return weighted(t, cam_forward(t, store, "cam", in[0], in[1]), w);
            };
            return check_gradients(build, {ys, yk}, gc);
        });
    }
    {
        Rng init(mix_seed(seed, 27));
        ParameterStore store;
        register_mlm_params(store, "mlm", 6, init);
        Rng rng(mix_seed(seed, 28));
        Tensor y1 = rand_tensor({3, 6}, rng, -1.0, 1.0);
        Tensor y2 = rand_tensor({3, 6}, rng, -1.0, 1.0);
        Tensor w1 = rand_tensor({3, 6}, rng, -1.0, 1.0);
        Tensor w2 = rand_tensor({3, 6}, rng, -1.0, 1.0);
        sr.run("mlm_params", [&] {
            auto build = [&](Tape& t) {
                MlmOut out = mlm_forward(t, store, "mlm", t.input(y1), t.input(y2));
                return ops::add(weighted(t, out.y1, w1), weighted(t, out.y2, w2));
            };
            return check_param_gradients(build, store, gc);
        });
        sr.run("mlm_inputs", [&] {
            auto build = [&](Tape& t, const std::vector<Var>& in) {
                MlmOut out = mlm_forward(t, store, "mlm", in[0], in[1]);
                return ops::add(weighted(t, out.y1, w1), weighted(t, out.y2, w2));
            };
            return check_gradients(build, {y1, y2}, gc);
        });
    }

    // Branch stacks: backbone, strip pooling, temporal max and the per-part
    // projection chained together, probing every backbone parameter.
    {
        std::vector<int> stages = {2, 3};
        Rng init(mix_seed(seed, 29));
        ParameterStore store;
        register_branch_params(store, "b", true, 1, stages, init);
        register_part_projection(store, "proj", 2, 3, 4, init);
        Rng rng(mix_seed(seed, 30));
        Tensor x = rand_tensor({1, 2, 12, 8}, rng, 0.0, 1.0);
        Tensor w = rand_tensor({2, 4}, rng, -1.0, 1.0);
        sr.run("silhouette_branch", [&] {
            auto build = [&](Tape& t) {
                Var fmap = encode_branch(t, store, "b", true, t.input(x), stages);
                Var pooled = temporal_aggregate(horizontal_mapping(fmap, 2));
                return weighted(t, part_projection(t, store, "proj", pooled), w);
            };
            return check_param_gradients(build, store, gc);
        });
    }
    {
        std::vector<int> stages = {2, 3};
        Rng init(mix_seed(seed, 31));
        ParameterStore store;
        register_branch_params(store, "b", false, 3, stages, init);
        register_part_projection(store, "proj", 2, 3, 4, init);
        Rng rng(mix_seed(seed, 32));
        Tensor x = rand_tensor({3, 2, 12, 8}, rng, 0.0, 1.0);
        Tensor w = rand_tensor({2, 4}, rng, -1.0, 1.0);
        sr.run("skeleton_branch", [&] {
            auto build = [&](Tape& t) {
                Var fmap = encode_branch(t, store, "b", false, t.input(x), stages);
                Var pooled = temporal_aggregate(horizontal_mapping(fmap, 2));
                return weighted(t, part_projection(t, store, "proj", pooled), w);
            };
            return check_param_gradients(build, store, gc);
        });
    }

    // Full model with the complete training objective; probes a random
    // subset of parameters across every layer.
    {
        ModelConfig mc;
        mc.backbone.sil_stages = {2, 3};
        mc.backbone.ske_stages = {2, 3};
        mc.backbone.part_count = 2;
        mc.backbone.embed_dim = 8;
        mc.backbone.sil_height = 16;
        mc.backbone.sil_width = 12;
        mc.backbone.ske_height = 16;
        mc.backbone.ske_width = 12;
        mc.skeleton_channels = 5;
        mc.cam_reduction = 4;
        mc.num_classes = 2;
        GaitMAModel model(mc, 42);
        std::vector<int> labels = {0, 0, 1, 1};
        Rng rng(mix_seed(seed, 33));
        std::vector<GaitMAModel::SampleInput> batch;
        for (int i = 0; i < 4; ++i) batch.push_back(structured_sample(labels[static_cast<std::size_t>(i)], i, 5, 2, 16, 12, rng));
        LossWeights lw;
        GradCheckConfig model_gc = gc;
        model_gc.probes = 240;
        model_gc.seed = mix_seed(seed, 34);
        sr.run("composed_model", [&] {
            auto build = [&](Tape& t) {
                return model.compute_loss(t, batch, labels, lw, 0.2, true, false).total;
            };
            return check_param_gradients(build, model.params(), model_gc);
        });
    }

    return sr.entries;
}

bool suite_passed(const std::vector<SuiteEntry>& entries) {
    for (const auto& e : entries)
        if (!e.result.ok()) return false;
    return !entries.empty();
}

}  // namespace gaitma
