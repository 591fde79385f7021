// Release gate for the full pipeline. Each criterion prints exactly one
// [PASS]/[FAIL] line with its wall time and a short detail; the process exits
// nonzero if any criterion fails. Budgets are part of the pass condition.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "gaitma/checkpoint.hpp"
#include "gaitma/config.hpp"
#include "gaitma/dataset.hpp"
#include "gaitma/eval.hpp"
#include "gaitma/fusion.hpp"
#include "gaitma/gradsuite.hpp"
#include "gaitma/heatmap.hpp"
#include "gaitma/losses.hpp"
#include "gaitma/ops.hpp"
#include "gaitma/synthgait.hpp"
#include "gaitma/trainer.hpp"

using namespace gaitma;

namespace fs = std::filesystem;

namespace {

fs::path g_work;

std::string work_dir(const std::string& tag) {
    fs::path p = g_work / tag;
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<unreadable:" + path + ">";
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, ap);
    va_end(ap);
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// 1. Rendered heatmaps against a direct per-pixel recomputation
// ---------------------------------------------------------------------------

double seg_dist_ref(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

bool crit_heatmap_oracle(std::string& detail, double budget_s) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();

    Rng rng(0x4a17);
    SkeletonTopology topo = default_topology();
    PoseSequence seq;
    for (int t = 0; t < 50; ++t) {
        PoseFrame f;
        for (int k = 0; k < 17; ++k) {
            Joint j;
            j.x = uniform_real(rng, 0.0, 63.0);
            j.y = uniform_real(rng, 0.0, 43.0);
            j.confidence = uniform_real(rng, 0.0, 1.0);
            f.joints.push_back(j);
        }
        seq.push_back(f);
    }

    const int H = 64, W = 44;
    double worst = 0.0;
    for (double sigma : {1.0, 2.0, 4.0}) {
        HeatmapVolume vol = stack_sequence(seq, topo, sigma, H, W);
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (int t = 0; t < 50; ++t) {
            const PoseFrame& f = seq[static_cast<std::size_t>(t)];
            for (int k = 0; k < 17; ++k) {
                const Joint& jt = f.joints[static_cast<std::size_t>(k)];
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j) {
                        double d2 = (i - jt.x) * (i - jt.x) + (j - jt.y) * (j - jt.y);
                        double want = std::exp(-d2 * inv) * jt.confidence;
                        worst = std::max(worst, std::abs(vol.values.at(t, k, i, j) - want));
                    }
            }
            for (int l = 0; l < topo.limb_count(); ++l) {
                auto [a, b] = topo.limbs[static_cast<std::size_t>(l)];
                const Joint& ja = f.joints[static_cast<std::size_t>(a)];
                const Joint& jb = f.joints[static_cast<std::size_t>(b)];
                const double conf = std::min(ja.confidence, jb.confidence);
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j) {
                        double d = seg_dist_ref(i, j, ja.x, ja.y, jb.x, jb.y);
                        double want = std::exp(-d * d * inv) * conf;
                        worst = std::max(worst, std::abs(vol.values.at(t, 17 + l, i, j) - want));
                    }
            }
        }
    }

    double secs = std::chrono::duration<double>(clock::now() - t0).count();
    detail = fmt("max abs diff %.3e over 50 frames x {1,2,4} sigma (budget %gs)", worst, budget_s);
    return worst <= 1e-12 && secs < budget_s;
}

// ---------------------------------------------------------------------------
// 2. Finite-difference audit of every op and the composed model
// ---------------------------------------------------------------------------

bool crit_gradient_suite(std::string& detail, double budget_s) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    auto entries = run_gradient_suite(2026);
    double secs = std::chrono::duration<double>(clock::now() - t0).count();

    bool all_ok = suite_passed(entries);
    int composed_checked = 0;
    double worst = 0.0;
    int total_checked = 0;
    for (const auto& e : entries) {
        worst = std::max(worst, e.result.max_rel_err);
        total_checked += e.result.checked;
        if (e.name == "composed_model") composed_checked = e.result.checked;
        if (!e.result.ok())
            detail += fmt("%s: %s; ", e.name.c_str(),
                          e.result.first_failure.empty() ? "failed" : e.result.first_failure.c_str());
    }
    detail += fmt("%zu entries, %d probes, composed=%d, max rel err %.3e (budget %gs)", entries.size(),
                  total_checked, composed_checked, worst, budget_s);
    return all_ok && composed_checked >= 200 && secs < budget_s;
}

// ---------------------------------------------------------------------------
// 3. Closed-form identities of the attention and alignment pieces
// ---------------------------------------------------------------------------

bool crit_exact_identities(std::string& detail) {
    bool ok = true;

    // softmax rows sum to one even for widely spread logits
    Rng rng(0x1d5);
    Tensor logits({40, 30});
    for (std::int64_t i = 0; i < logits.size(); ++i) logits[i] = uniform_real(rng, -80.0, 80.0);
    Tape tape;
    Var sm = ops::softmax_rows(tape.input(logits));
    double worst_row = 0.0;
    for (int i = 0; i < 40; ++i) {
        double s = 0.0;
        for (int j = 0; j < 30; ++j) s += sm.value().at(i, j);
        worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
    ok = ok && worst_row <= 1e-9;

    // zeroed attention parameters turn the gate into a constant 1.5 scaling
    const int P = 4, C = 16;
    ParameterStore store;
    Rng prng(7);
    register_cam_params(store, "cam", C, 4, prng);
    for (const auto& p : store.all()) p->value.fill(0.0);
    Tensor ys({P, C}), yk({P, C});
    for (std::int64_t i = 0; i < ys.size(); ++i) ys[i] = uniform_real(rng, -2.0, 2.0);
    for (std::int64_t i = 0; i < yk.size(); ++i) yk[i] = uniform_real(rng, -2.0, 2.0);
    Tape ctape;
    Var out = cam_forward(ctape, store, "cam", ctape.input(ys), ctape.input(yk));
    double cam_diff = 0.0;
    for (int p = 0; p < P; ++p)
        for (int c = 0; c < 2 * C; ++c) {
            double base = c < C ? ys.at(p, c) : yk.at(p, c - C);
            cam_diff = std::max(cam_diff, std::abs(out.value().at(p, c) - 1.5 * base));
        }
    ok = ok && cam_diff <= 1e-12;

    // identical distributions are at distance exactly zero
    GaussianStats g;
    g.mu = Tensor({5});
    g.sigma_diag = Tensor({5});
    for (int i = 0; i < 5; ++i) {
        g.mu[i] = uniform_real(rng, -3.0, 3.0);
        g.sigma_diag[i] = uniform_real(rng, 0.1, 4.0);
    }
    double w_same = wasserstein_loss(g, g);
    ok = ok && w_same == 0.0;

    // hand cases: unit mean shift and a 4-vs-1 variance pair both cost one
    GaussianStats a, b;
    a.mu = Tensor({1}, {0.0});
    a.sigma_diag = Tensor({1}, {1.0});
    b.mu = Tensor({1}, {1.0});
    b.sigma_diag = Tensor({1}, {1.0});
    double w_shift = wasserstein_loss(a, b);
    b.mu = Tensor({1}, {0.0});
    b.sigma_diag = Tensor({1}, {4.0});
    double w_var = wasserstein_loss(a, b);
    ok = ok && std::abs(w_shift - 1.0) <= 1e-12 && std::abs(w_var - 1.0) <= 1e-12;

    detail = fmt("softmax worst row |sum-1| %.2e, gated-residual diff %.2e, self distance %g, "
                 "shift/variance cases %.15g/%.15g",
                 worst_row, cam_diff, w_same, w_shift, w_var);
    return ok;
}

// ---------------------------------------------------------------------------
// 4. Retrieval metrics against an independent full-sort reference
// ---------------------------------------------------------------------------

std::vector<int> ref_order(const Tensor& dist, int probe, const std::vector<int>& g_ids, int p_id) {
    std::vector<std::pair<double, int>> v;
    for (int j = 0; j < dist.dim(1); ++j)
        if (g_ids[static_cast<std::size_t>(j)] != p_id) v.emplace_back(dist.at(probe, j), j);
    std::sort(v.begin(), v.end());
    std::vector<int> order;
    order.reserve(v.size());
    for (auto& [d, j] : v) order.push_back(j);
    return order;
}

bool crit_retrieval_metrics(std::string& detail) {
    Rng rng(0x9e7);
    double worst = 0.0;
    int rank_mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = uniform_int(rng, 1, 20);
        const int m = uniform_int(rng, 2, 50);
        Tensor dist({n, m});
        for (std::int64_t i = 0; i < dist.size(); ++i) dist[i] = 0.125 * uniform_int(rng, 0, 15);
        std::vector<int> gl, pl, gi, pi;
        for (int j = 0; j < m; ++j) {
            gl.push_back(uniform_int(rng, 0, 4));
            gi.push_back(j);
        }
        for (int i = 0; i < n; ++i) {
            pl.push_back(uniform_int(rng, 0, 9) == 0 ? 9 : gl[static_cast<std::size_t>(uniform_int(rng, 0, m - 1))]);
            pi.push_back(uniform_int(rng, 0, 3) == 0 ? uniform_int(rng, 0, m - 1) : 1000 + i);
        }

        for (int k : {1, std::min(5, m), m}) {
            int hits = 0;
            for (int i = 0; i < n; ++i) {
                auto order = ref_order(dist, i, gi, pi[static_cast<std::size_t>(i)]);
                for (int r = 0; r < std::min<int>(k, static_cast<int>(order.size())); ++r)
                    if (gl[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] ==
                        pl[static_cast<std::size_t>(i)]) {
                        ++hits;
                        break;
                    }
            }
            double want = static_cast<double>(hits) / n;
            if (rank_k(dist, pl, gl, pi, gi, k) != want) ++rank_mismatches;
        }

        double ap_sum = 0.0, inp_sum = 0.0;
        int used = 0;
        for (int i = 0; i < n; ++i) {
            auto order = ref_order(dist, i, gi, pi[static_cast<std::size_t>(i)]);
            int matches = 0;
            double ap = 0.0;
            std::size_t last = 0;
            for (std::size_t r = 0; r < order.size(); ++r)
                if (gl[static_cast<std::size_t>(order[r])] == pl[static_cast<std::size_t>(i)]) {
                    ++matches;
                    ap += static_cast<double>(matches) / static_cast<double>(r + 1);
                    last = r + 1;
                }
            if (matches == 0) continue;
            ap_sum += ap / matches;
            inp_sum += static_cast<double>(matches) / static_cast<double>(last);
            ++used;
        }
        if (used == 0) continue;  // mean_ap would refuse; covered by unit tests
        MeanResult got_ap = mean_ap(dist, pl, gl, pi, gi);
        MeanResult got_inp = mean_inp(dist, pl, gl, pi, gi);
        worst = std::max(worst, std::abs(got_ap.value - ap_sum / used));
        worst = std::max(worst, std::abs(got_inp.value - inp_sum / used));
        if (got_ap.excluded != n - used) ++rank_mismatches;
    }
    detail = fmt("100 instances, rank mismatches %d, worst mAP/mINP diff %.3e", rank_mismatches, worst);
    return rank_mismatches == 0 && worst <= 1e-10;
}

// ---------------------------------------------------------------------------
// 5-7. Training behaviors on the synthetic walking data
// ---------------------------------------------------------------------------

RunConfig reduced_config() {
    RunConfig cfg;
    cfg.model.backbone.sil_stages = {4, 8};
    cfg.model.backbone.ske_stages = {4, 8};
    cfg.model.backbone.part_count = 4;
    cfg.model.backbone.embed_dim = 16;
    cfg.model.backbone.sil_height = 32;
    cfg.model.backbone.sil_width = 22;
    cfg.model.backbone.ske_height = 32;
    cfg.model.backbone.ske_width = 22;
    cfg.train.lr = 0.1;
    cfg.train.batch_identities = 4;
    cfg.train.batch_samples = 2;
    cfg.train.frames_per_clip = 8;
    cfg.train.log_every = 50;
    return cfg;
}

double eval_rank1(const RunConfig& resolved, const std::string& ckpt_path, const DatasetIndex& idx,
                  const std::vector<int>& gallery_seqs, const std::vector<int>& probe_seqs) {
    GaitMAModel model(resolved.model, resolved.train.seed);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    load_parameters(ckpt, model.params());
    auto gallery = embed_sequences(model, resolved, idx, gallery_seqs);
    auto probes = embed_sequences(model, resolved, idx, probe_seqs);
    return evaluate_embeddings(gallery, probes).rank1;
}

bool crit_overfit(std::string& detail, double budget_s) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();

    DatasetBuildConfig bc;
    bc.identities = 8;
    bc.sequences_per_identity = 4;
    bc.frames = 24;
    bc.height = 32;
    bc.width = 22;
    bc.seed = 0xA11CE;
    DatasetIndex idx = load_dataset(build_dataset(bc, work_dir("overfit_ds")));

    RunConfig cfg = reduced_config();
    cfg.train.total_iters = 500;
    cfg.train.milestones = {350, 450};
    cfg.train.seed = 42;
    TrainResult tr = train(cfg, idx, work_dir("overfit_run"));

    RunConfig resolved = resolve_config(cfg, idx);
    EvalSplit split = first_sequence_split(idx);
    double rank1 = eval_rank1(resolved, tr.final_checkpoint, idx, split.gallery, split.probes);
    double drop = tr.first_loss > 0.0 ? (tr.first_loss - tr.last_loss) / tr.first_loss : 0.0;

    double secs = std::chrono::duration<double>(clock::now() - t0).count();
    detail = fmt("train rank1 %.1f%%, loss %.4f -> %.4f (%.1f%% drop), %d degenerate batches (budget %gs)",
                 100.0 * rank1, tr.first_loss, tr.last_loss, 100.0 * drop, tr.degenerate_batches, budget_s);
    return rank1 == 1.0 && drop >= 0.8 && secs < budget_s;
}

DatasetIndex keep_sequences_upto(const DatasetIndex& idx, int max_sequence) {
    DatasetIndex out = idx;
    out.sequences.clear();
    out.by_identity.assign(static_cast<std::size_t>(idx.identities), {});
    for (const SequenceRef& ref : idx.sequences)
        if (ref.sequence <= max_sequence) {
            out.by_identity[static_cast<std::size_t>(ref.identity)].push_back(
                static_cast<int>(out.sequences.size()));
            out.sequences.push_back(ref);
        }
    out.sequences_per_identity = max_sequence + 1;
    return out;
}

std::vector<int> seqs_with_number(const DatasetIndex& idx, int number) {
    std::vector<int> out;
    for (std::size_t s = 0; s < idx.sequences.size(); ++s)
        if (idx.sequences[s].sequence == number) out.push_back(static_cast<int>(s));
    return out;
}

bool crit_ablation(std::string& detail, double budget_s) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();

    DatasetBuildConfig bc;
    bc.identities = 16;
    bc.sequences_per_identity = 6;
    bc.frames = 24;
    bc.height = 32;
    bc.width = 22;
    bc.seed = 0xB0B1;
    OcclusionRect legs;
    legs.row0 = 16;
    legs.col0 = 0;
    legs.height = 16;
    legs.width = 22;
    legs.probability = 0.5;
    bc.corruption.occluders.push_back(legs);
    bc.corruption.confidence_noise = 0.3;
    DatasetIndex idx = load_dataset(build_dataset(bc, work_dir("ablation_ds")));

    DatasetIndex train_idx = keep_sequences_upto(idx, 3);
    std::vector<int> gallery_seqs = seqs_with_number(idx, 4);
    std::vector<int> probe_seqs = seqs_with_number(idx, 5);

    struct Variant {
        const char* name;
        std::function<void(RunConfig&)> tweak;
        double mean_rank1 = 0.0;
    };
    std::vector<Variant> variants = {
        {"full", [](RunConfig&) {}},
        {"no_w", [](RunConfig& c) { c.wasserstein = false; }},
        {"sil_ske",
         [](RunConfig& c) {
             c.model.cam = false;
             c.model.mlm = false;
             c.wasserstein = false;
         }},
        {"sil_only",
         [](RunConfig& c) {
             c.model.skeleton_branch = false;
             c.model.cam = false;
             c.model.mlm = false;
             c.wasserstein = false;
         }},
    };

    const std::vector<std::uint64_t> seeds = {1, 2, 3};
    for (Variant& v : variants) {
        double sum = 0.0;
        for (std::uint64_t seed : seeds) {
            RunConfig cfg = reduced_config();
            cfg.train.total_iters = 250;
            cfg.train.milestones = {180};
            cfg.train.seed = seed;
            v.tweak(cfg);
            std::string out = work_dir(fmt("ablation_%s_%llu", v.name, static_cast<unsigned long long>(seed)));
            TrainResult tr = train(cfg, train_idx, out);
            RunConfig resolved = resolve_config(cfg, train_idx);
            sum += eval_rank1(resolved, tr.final_checkpoint, idx, gallery_seqs, probe_seqs);
        }
        v.mean_rank1 = sum / static_cast<double>(seeds.size());
    }

    const double full = variants[0].mean_rank1, no_w = variants[1].mean_rank1;
    const double sil_ske = variants[2].mean_rank1, sil_only = variants[3].mean_rank1;
    double secs = std::chrono::duration<double>(clock::now() - t0).count();
    detail = fmt("mean held-out rank1: full %.3f, no_w %.3f, sil_ske %.3f, sil_only %.3f (budget %gs)", full,
                 no_w, sil_ske, sil_only, budget_s);
    bool order_ok = full >= sil_only && full >= no_w - 0.02 && sil_ske >= sil_only;
    return order_ok && secs < budget_s;
}

bool crit_determinism(std::string& detail) {
    DatasetBuildConfig bc;
    bc.identities = 4;
    bc.sequences_per_identity = 2;
    bc.frames = 8;
    bc.height = 32;
    bc.width = 22;
    bc.seed = 0xDE7;
    DatasetIndex idx = load_dataset(build_dataset(bc, work_dir("det_ds")));

    RunConfig cfg = reduced_config();
    cfg.train.total_iters = 6;
    cfg.train.milestones = {3};
    cfg.train.seed = 99;

    TrainResult a = train(cfg, idx, work_dir("det_a"));
    TrainResult b = train(cfg, idx, work_dir("det_b"));
    bool repeat_ok = slurp(a.final_checkpoint) == slurp(b.final_checkpoint);

    std::string mid = work_dir("det_a") + "/checkpoint_3.gmck";
    TrainResult c = train(cfg, idx, work_dir("det_c"), mid);
    bool resume_ok = slurp(c.final_checkpoint) == slurp(a.final_checkpoint);

    detail = fmt("same-seed reruns %s, milestone resume %s", repeat_ok ? "identical" : "DIFFER",
                 resume_ok ? "identical" : "DIFFERS");
    return repeat_ok && resume_ok;
}

}  // namespace

int main() {
    g_work = fs::temp_directory_path() / ("gaitma_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(g_work);

    using clock = std::chrono::steady_clock;
    int failures = 0;
    auto run = [&](const char* name, const std::function<bool(std::string&)>& fn) {
        auto t0 = clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("[%s] %-18s (%8.1fs) %s\n", ok ? "PASS" : "FAIL", name, secs, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    };

    run("heatmap-oracle", [](std::string& d) { return crit_heatmap_oracle(d, 10.0); });
    run("gradient-suite", [](std::string& d) { return crit_gradient_suite(d, 300.0); });
    run("exact-identities", [](std::string& d) { return crit_exact_identities(d); });
    run("retrieval-metrics", [](std::string& d) { return crit_retrieval_metrics(d); });
    run("overfit", [](std::string& d) { return crit_overfit(d, 900.0); });
    run("ablation", [](std::string& d) { return crit_ablation(d, 7200.0); });
    run("determinism", [](std::string& d) { return crit_determinism(d); });

    std::printf("acceptance: %d/7 criteria passed\n", 7 - failures);

    std::error_code ec;
    fs::remove_all(g_work, ec);
    return failures == 0 ? 0 : 1;
}
