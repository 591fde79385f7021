#include "gaitma/model.hpp"

#include "gaitma/errors.hpp"

namespace gaitma {

void ModelConfig::validate() const {
    backbone.validate();
    if (skeleton_branch && skeleton_channels <= 0)
        throw InvalidArgument("model: skeleton_channels must be positive");
    if (num_classes < 0) throw InvalidArgument("model: num_classes must be non-negative");
    if (skeleton_branch && cam) {
        int c2 = 2 * backbone.embed_dim;
        if (cam_reduction <= 0 || c2 % cam_reduction != 0)
            throw InvalidArgument("model: cam_reduction must divide 2·embed_dim");
    }
    if (mlm_scale < 0.0) throw InvalidArgument("model: mlm_scale must be non-negative");
}

int ModelConfig::embedding_width() const {
    if (!skeleton_branch) return backbone.embed_dim;
    if (cam || mlm) return 2 * backbone.embed_dim;
    return backbone.embed_dim;
}

GaitMAModel::GaitMAModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(init_seed);
    const BackboneConfig& bb = cfg_.backbone;
    register_branch_params(store_, "sil", /*temporal=*/true, 1, bb.sil_stages, rng);
    if (cfg_.skeleton_branch)
        register_branch_params(store_, "ske", /*temporal=*/false, cfg_.skeleton_channels, bb.ske_stages, rng);
    register_part_projection(store_, "sil.proj", bb.part_count, bb.sil_stages.back(), bb.embed_dim, rng);
    if (cfg_.skeleton_branch)
        register_part_projection(store_, "ske.proj", bb.part_count, bb.ske_stages.back(), bb.embed_dim, rng);
    if (cfg_.skeleton_branch && cfg_.cam) register_cam_params(store_, "cam", bb.embed_dim, cfg_.cam_reduction, rng);
    if (cfg_.skeleton_branch && cfg_.mlm) register_mlm_params(store_, "mlm", bb.embed_dim, rng);
    if (cfg_.num_classes > 0) {
        int width = cfg_.embedding_width();
        for (int p = 0; p < bb.part_count; ++p) {
            std::string name = "head.part" + std::to_string(p);
            store_.add(name + ".weight", uniform_fan_in({width, cfg_.num_classes}, width, rng));
            store_.add(name + ".bias", Tensor({cfg_.num_classes}));
        }
    }
}

Var GaitMAModel::branch_features(Tape& tape, const char* prefix, bool temporal, Var x) {
    const BackboneConfig& bb = cfg_.backbone;
    Var fmap = encode_branch(tape, store_, prefix, temporal, x, temporal ? bb.sil_stages : bb.ske_stages);
    Var parts = temporal_aggregate(horizontal_mapping(fmap, bb.part_count));
    return part_projection(tape, store_, std::string(prefix) + ".proj", parts);
}

Var GaitMAModel::forward_one(Tape& tape, const SampleInput& sample, Var* m1, Var* m2) {
    const BackboneConfig& bb = cfg_.backbone;
    const Tensor& sil = sample.silhouette;
    if (sil.rank() != 4 || sil.dim(0) != 1 || sil.dim(2) != bb.sil_height || sil.dim(3) != bb.sil_width)
        throw InvalidArgument("model: silhouette must be 1×T×" + std::to_string(bb.sil_height) + "×" +
                              std::to_string(bb.sil_width) + ", got " + dims_to_string(sil.dims()));
    Var y_sil = branch_features(tape, "sil", /*temporal=*/true, tape.input(sil));
    if (!cfg_.skeleton_branch) return y_sil;

    const Tensor& hm = sample.heatmaps;
    if (hm.rank() != 4 || hm.dim(0) != cfg_.skeleton_channels || hm.dim(1) != sil.dim(1) ||
        hm.dim(2) != bb.ske_height || hm.dim(3) != bb.ske_width)
        throw InvalidArgument("model: heatmaps must be " + std::to_string(cfg_.skeleton_channels) + "×" +
                              std::to_string(sil.dim(1)) + "×" + std::to_string(bb.ske_height) + "×" +
                              std::to_string(bb.ske_width) + ", got " + dims_to_string(hm.dims()));
    Var y_ske = branch_features(tape, "ske", /*temporal=*/false, tape.input(hm));

    int c = bb.embed_dim;
    if (cfg_.cam) {
        Var y_align = cam_forward(tape, store_, "cam", y_sil, y_ske);
        std::vector<Var> halves = ops::split(y_align, 1, {c, c});
        if (cfg_.mlm) {
            MlmOut mo = mlm_forward(tape, store_, "mlm", halves[0], halves[1], cfg_.mlm_scale);
            *m1 = mo.y1;
            *m2 = mo.y2;
            return fuse_output(mo.y1, mo.y2);
        }
        *m1 = halves[0];
        *m2 = halves[1];
        return y_align;
    }
    if (cfg_.mlm) {
        MlmOut mo = mlm_forward(tape, store_, "mlm", y_sil, y_ske, cfg_.mlm_scale);
        *m1 = mo.y1;
        *m2 = mo.y2;
        return fuse_output(mo.y1, mo.y2);
    }
    *m1 = y_sil;
    *m2 = y_ske;
    return ops::add(y_sil, y_ske);
}

GaitMAModel::Forward GaitMAModel::forward(Tape& tape, const std::vector<SampleInput>& batch) {
    if (batch.empty()) throw InvalidArgument("model: empty batch");
    const BackboneConfig& bb = cfg_.backbone;
    int width = cfg_.embedding_width();
    int flat = bb.part_count * width;
    int flat_m = bb.part_count * bb.embed_dim;

    Forward out;
    std::vector<Var> rows, m1_rows, m2_rows;
    for (const SampleInput& s : batch) {
        Var m1, m2;
        Var emb = forward_one(tape, s, &m1, &m2);
        rows.push_back(ops::reshape(emb, {1, flat}));
        if (m1.tape != nullptr) {
            m1_rows.push_back(ops::reshape(m1, {1, flat_m}));
            m2_rows.push_back(ops::reshape(m2, {1, flat_m}));
        }
    }
    out.embeddings = ops::concat(rows, 0);
    if (!m1_rows.empty()) {
        out.has_modalities = true;
        out.modality1 = ops::concat(m1_rows, 0);
        out.modality2 = ops::concat(m2_rows, 0);
    }
    if (cfg_.num_classes > 0) {
        for (int p = 0; p < bb.part_count; ++p) {
            Var feat = ops::slice(out.embeddings, 1, p * width, width);
            std::string name = "head.part" + std::to_string(p);
            out.part_logits.push_back(ops::linear(feat, tape.param(store_.get(name + ".weight")),
                                                  tape.param(store_.get(name + ".bias"))));
        }
    }
    return out;
}

Tensor GaitMAModel::embed(const SampleInput& sample) {
    Tape tape;
    Var m1, m2;
    Var emb = forward_one(tape, sample, &m1, &m2);
    const Tensor& v = emb.value();
    return Tensor({static_cast<int>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

GaitMAModel::LossBreakdown GaitMAModel::compute_loss(Tape& tape, const std::vector<SampleInput>& batch,
                                                     const std::vector<int>& labels, const LossWeights& weights,
                                                     double margin, bool wasserstein_on, bool per_identity) {
    if (labels.size() != batch.size()) throw InvalidArgument("model: label count must match batch size");
    Forward fwd = forward(tape, batch);

    LossBreakdown lb;
    Var l_tri = ops::triplet_batch_all(fwd.embeddings, labels, margin, &lb.triplet_stats);

    Var l_ce;
    if (!fwd.part_logits.empty()) {
        for (int y : labels)
            if (y < 0 || y >= cfg_.num_classes) throw InvalidArgument("model: label out of range for classifier");
        for (const Var& logits : fwd.part_logits) {
            Var part = ops::softmax_cross_entropy(logits, labels);
            l_ce = l_ce.tape == nullptr ? part : ops::add(l_ce, part);
        }
        l_ce = ops::scale(l_ce, 1.0 / static_cast<double>(fwd.part_logits.size()));
    } else {
        l_ce = tape.input(Tensor::scalar(0.0));
    }

    Var l_w;
    if (wasserstein_on && fwd.has_modalities) {
        l_w = wasserstein_grouped(tape, fwd.modality1, fwd.modality2, labels, per_identity);
    } else {
        l_w = tape.input(Tensor::scalar(0.0));
    }

    lb.triplet = l_tri.value()[0];
    lb.cross_entropy = l_ce.value()[0];
    lb.wasserstein = l_w.value()[0];
    lb.total = joint_loss(l_tri, l_ce, l_w, weights);
    return lb;
}

}  // namespace gaitma
