#include "gaitma/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "gaitma/errors.hpp"

namespace gaitma {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

Checkpoint snapshot(const GaitMAModel& model, const std::vector<Tensor>& velocity, std::uint64_t iteration,
                    std::uint64_t fingerprint, const Rng& rng) {
    Checkpoint ckpt;
    ckpt.iteration = iteration;
    ckpt.config_fingerprint = fingerprint;
    const auto& params = model.params().all();
    for (const auto& p : params) ckpt.entries.emplace_back(p->name, p->value);
    for (std::size_t i = 0; i < params.size(); ++i)
        ckpt.entries.emplace_back("momentum/" + params[i]->name, velocity[i]);
    ckpt.rng_state = save_rng_state(rng);
    return ckpt;
}

void restore(GaitMAModel& model, std::vector<Tensor>& velocity, Rng& rng, const Checkpoint& ckpt,
             std::uint64_t expected_fingerprint) {
    if (ckpt.config_fingerprint != expected_fingerprint)
        throw ContractError("checkpoint was produced by a different configuration (fingerprint mismatch)");
    auto& params = model.params();
    std::size_t expected = 2 * params.count();
    if (ckpt.entries.size() != expected)
        throw FormatError("checkpoint entry count does not match the model");
    for (std::size_t i = 0; i < params.all().size(); ++i) {
        Parameter& p = *params.all()[i];
        const Tensor* v = ckpt.find(p.name);
        const Tensor* mv = ckpt.find("momentum/" + p.name);
        if (v == nullptr || mv == nullptr) throw FormatError("checkpoint misses parameter " + p.name);
        if (v->dims() != p.value.dims() || mv->dims() != p.value.dims())
            throw FormatError("checkpoint dims mismatch for " + p.name);
        p.value = *v;
        velocity[i] = *mv;
    }
    load_rng_state(rng, ckpt.rng_state);
}

}  // namespace

std::vector<Tensor> make_velocity(const ParameterStore& store) {
    std::vector<Tensor> v;
    v.reserve(store.count());
    for (const auto& p : store.all()) v.emplace_back(p->value.dims());
    return v;
}

void sgd_step(ParameterStore& store, double lr, double weight_decay, double momentum,
              std::vector<Tensor>& velocity) {
    if (velocity.size() != store.count()) throw InvalidArgument("sgd_step: velocity buffers do not match store");
    for (std::size_t i = 0; i < store.all().size(); ++i) {
        Parameter& p = *store.all()[i];
        Tensor& v = velocity[i];
        if (!v.same_dims(p.value)) throw InvalidArgument("sgd_step: velocity dims mismatch for " + p.name);
        if (!p.grad.all_finite())
            throw ContractError("sgd_step: non-finite gradient in " + p.name);
        for (std::int64_t j = 0; j < p.value.size(); ++j) {
            double g = p.grad[j] + weight_decay * p.value[j];
            v[j] = momentum * v[j] + g;
            p.value[j] -= lr * v[j];
        }
    }
}

double lr_at(std::int64_t iter, const TrainConfig& cfg) {
    if (iter < 0) throw InvalidArgument("lr_at: negative iteration");
    double lr = cfg.lr;
    for (std::int64_t m : cfg.milestones)
        if (m <= iter) lr *= 0.1;
    return lr;
}

std::vector<std::pair<int, int>> sample_batch(const DatasetIndex& idx, int batch_identities, int batch_samples,
                                              Rng& rng) {
    const int n_ids = idx.identities;
    if (batch_identities < 1 || batch_samples < 1) throw InvalidArgument("sample_batch: counts must be >= 1");
    if (n_ids < batch_identities)
        throw InvalidArgument("sample_batch: dataset has " + std::to_string(n_ids) +
                              " identities, batch needs " + std::to_string(batch_identities));

    std::vector<int> ids(static_cast<std::size_t>(n_ids));
    for (int i = 0; i < n_ids; ++i) ids[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < batch_identities; ++i) {
        int j = i + uniform_int(rng, 0, n_ids - 1 - i);
        std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
    }

    std::vector<std::pair<int, int>> batch;
    batch.reserve(static_cast<std::size_t>(batch_identities) * batch_samples);
    for (int i = 0; i < batch_identities; ++i) {
        int label = ids[static_cast<std::size_t>(i)];
        const std::vector<int>& seqs = idx.by_identity[static_cast<std::size_t>(label)];
        const int avail = static_cast<int>(seqs.size());
        if (avail >= batch_samples) {
            std::vector<int> pool = seqs;
            for (int k = 0; k < batch_samples; ++k) {
                int j = k + uniform_int(rng, 0, avail - 1 - k);
                std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
                batch.emplace_back(pool[static_cast<std::size_t>(k)], label);
            }
        } else {
            for (int k = 0; k < batch_samples; ++k)
                batch.emplace_back(seqs[static_cast<std::size_t>(uniform_int(rng, 0, avail - 1))], label);
        }
    }
    return batch;
}

RunConfig resolve_config(RunConfig cfg, const DatasetIndex& data) {
    if (cfg.model.num_classes == 0) cfg.model.num_classes = data.identities;
    if (cfg.model.num_classes != data.identities)
        throw InvalidArgument("config: model.num_classes " + std::to_string(cfg.model.num_classes) +
                              " does not match the dataset's " + std::to_string(data.identities));
    cfg.validate();
    return cfg;
}

TrainResult train(const RunConfig& raw_cfg, const DatasetIndex& data, const std::string& out_dir,
                  const std::string& resume_path) {
    RunConfig cfg = resolve_config(raw_cfg, data);
    if (data.height != cfg.model.backbone.sil_height || data.width != cfg.model.backbone.sil_width)
        throw InvalidArgument("config: dataset silhouettes are " + std::to_string(data.height) + "x" +
                              std::to_string(data.width) + " but the model expects " +
                              std::to_string(cfg.model.backbone.sil_height) + "x" +
                              std::to_string(cfg.model.backbone.sil_width));
    const int k_total = data.topology.joint_count + data.topology.limb_count();
    if (cfg.model.skeleton_branch && cfg.model.skeleton_channels != k_total)
        throw InvalidArgument("config: model.skeleton_channels " + std::to_string(cfg.model.skeleton_channels) +
                              " does not match the dataset topology's " + std::to_string(k_total));

    fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

    const std::uint64_t fingerprint = cfg.fingerprint();
    write_text_file(out / "config.resolved", cfg.canonical());

    GaitMAModel model(cfg.model, cfg.train.seed);
    std::vector<Tensor> velocity = make_velocity(model.params());
    Rng rng(mix_seed(cfg.train.seed, 0xb47c, 0));
    std::uint64_t start_iter = 0;
    if (!resume_path.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_path);
        restore(model, velocity, rng, ckpt, fingerprint);
        start_iter = ckpt.iteration;
    }

    std::ofstream metrics(out / "metrics.jsonl", std::ios::binary | std::ios::app);
    if (!metrics) throw IoError("cannot open metrics log in " + out.string());

    TrainResult result;
    result.iterations = cfg.train.total_iters;
    const std::int64_t total = cfg.train.total_iters;
    for (std::int64_t iter = static_cast<std::int64_t>(start_iter); iter < total; ++iter) {
        auto picks = sample_batch(data, cfg.train.batch_identities, cfg.train.batch_samples, rng);
        std::vector<GaitMAModel::SampleInput> batch;
        std::vector<int> labels;
        batch.reserve(picks.size());
        labels.reserve(picks.size());
        for (auto [seq_index, label] : picks) {
            RawSequence rawseq = load_sequence(data, seq_index);
            auto frames = sample_clip_indices(static_cast<int>(rawseq.poses.size()), cfg.train.frames_per_clip,
                                              rng);
            batch.push_back(assemble_sample(rawseq, frames, data.topology, cfg.heatmap_sigma,
                                            cfg.model.backbone.sil_height, cfg.model.backbone.sil_width,
                                            cfg.model.backbone.ske_height, cfg.model.backbone.ske_width));
            labels.push_back(label);
        }

        Tape tape;
        auto loss = model.compute_loss(tape, batch, labels, cfg.loss_weights, cfg.triplet_margin,
                                       cfg.wasserstein, cfg.wasserstein_per_identity);
        model.params().zero_grads();
        tape.backward(loss.total);

        const double lr = lr_at(iter, cfg.train);
        if (iter == static_cast<std::int64_t>(start_iter)) result.first_loss = loss.total.scalar();
        result.last_loss = loss.total.scalar();
        if (loss.triplet_stats.degenerate) ++result.degenerate_batches;

        if (iter % cfg.train.log_every == 0 || iter + 1 == total) {
            json line = {{"iteration", iter},
                         {"loss", loss.total.scalar()},
                         {"triplet", loss.triplet},
                         {"cross_entropy", loss.cross_entropy},
                         {"wasserstein", loss.wasserstein},
                         {"active_triplets", loss.triplet_stats.active},
                         {"degenerate", loss.triplet_stats.degenerate},
                         {"lr", lr}};
            metrics << line.dump() << "\n";
            if (!metrics) throw IoError("short write to metrics log");
        }

        sgd_step(model.params(), lr, cfg.train.weight_decay, cfg.train.momentum, velocity);

        if (std::find(cfg.train.milestones.begin(), cfg.train.milestones.end(), iter + 1) !=
            cfg.train.milestones.end()) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_%lld.gmck", static_cast<long long>(iter + 1));
            save_checkpoint(snapshot(model, velocity, static_cast<std::uint64_t>(iter + 1), fingerprint, rng),
                            (out / name).string());
        }
    }

    fs::path final_path = out / "checkpoint_final.gmck";
    save_checkpoint(snapshot(model, velocity, static_cast<std::uint64_t>(total), fingerprint, rng),
                    final_path.string());
    result.final_checkpoint = final_path.string();
    return result;
}

}  // namespace gaitma
