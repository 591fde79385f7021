#pragma once

#include <cstdint>
#include <vector>

#include "gaitma/encoders.hpp"
#include "gaitma/fusion.hpp"
#include "gaitma/losses.hpp"
#include "gaitma/ops.hpp"

namespace gaitma {

struct ModelConfig {
    BackboneConfig backbone;
    int skeleton_channels = 29;  ///< heatmap channels K_total (joints + limbs)
    bool skeleton_branch = true;
    bool cam = true;  ///< co-attention alignment; off = skip straight to the next fusion step
    bool mlm = true;  ///< mutual learning; off with cam off = element-wise addition of the branches
    int cam_reduction = 4;
    double mlm_scale = 0.0;  ///< attention scale d; 0 selects embed_dim
    int num_classes = 0;     ///< 0 = no classifier head

    void validate() const;
    /// Channels per part of the final embedding (2C when the two modalities
    /// are concatenated, C for single-modality or additive fusion).
    int embedding_width() const;
};

/// Dual-branch gait recognition model. Parameters are registered in a fixed
/// order during construction, so one seed always yields one initialization.
class GaitMAModel {
public:
    GaitMAModel(ModelConfig cfg, std::uint64_t init_seed);

    ParameterStore& params() { return store_; }
    const ParameterStore& params() const { return store_; }
    const ModelConfig& config() const { return cfg_; }

    struct SampleInput {
        Tensor silhouette;  ///< 1×T×Hs×Ws, values in [0,1]
        Tensor heatmaps;    ///< K×T×Hk×Wk; ignored when the skeleton branch is off
    };

    struct Forward {
        Var embeddings;  ///< N×(P·embedding_width), flattened per-part features
        bool has_modalities = false;
        Var modality1;  ///< N×(P·C) refined per-modality features, when both branches run
        Var modality2;
        std::vector<Var> part_logits;  ///< one N×num_classes matrix per part
    };

    Forward forward(Tape& tape, const std::vector<SampleInput>& batch);

    /// Flattened embedding of one sample, for retrieval.
    Tensor embed(const SampleInput& sample);

    struct LossBreakdown {
        Var total;
        double triplet = 0.0;
        double cross_entropy = 0.0;
        double wasserstein = 0.0;
        ops::TripletStats triplet_stats;
    };

    /// Full training objective on one batch. Labels must be grouped
    /// contiguously by identity when per_identity statistics are requested.
    LossBreakdown compute_loss(Tape& tape, const std::vector<SampleInput>& batch, const std::vector<int>& labels,
                               const LossWeights& weights, double margin, bool wasserstein_on, bool per_identity);

private:
    Var forward_one(Tape& tape, const SampleInput& sample, Var* m1, Var* m2);
    Var branch_features(Tape& tape, const char* prefix, bool temporal, Var x);

    ModelConfig cfg_;
    ParameterStore store_;
};

}  // namespace gaitma
