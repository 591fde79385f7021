#pragma once

#include <cstdint>
#include <string>

#include "gaitma/model.hpp"

namespace gaitma {

/// Trainer hyperparameters; see the config keys under `train.` for the file
/// representation.
struct TrainConfig {
    double lr = 0.1;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    std::vector<std::int64_t> milestones;  // iterations where lr drops by 10x
    std::int64_t total_iters = 0;
    int batch_identities = 8;  // P_b
    int batch_samples = 4;     // K_b
    int frames_per_clip = 16;
    std::uint64_t seed = 0;
    int log_every = 10;

    /// lr positive, milestones strictly increasing, P_b >= 2, K_b >= 2.
    void validate() const;
};

/// Full run configuration: model shape, fusion toggles, loss weights and the
/// training schedule. File format is one `section.key=value` per line, `#`
/// comments, unknown keys rejected.
struct RunConfig {
    ModelConfig model;
    double heatmap_sigma = 2.0;
    LossWeights loss_weights;
    double triplet_margin = 0.2;
    bool wasserstein = true;
    bool wasserstein_per_identity = false;
    TrainConfig train;

    /// Applies one key=value assignment; FormatError on unknown keys or
    /// unparsable values.
    void apply(const std::string& key, const std::string& value);

    void validate() const;

    /// Every key in a fixed order with shortest round-trip number formatting;
    /// parsing the result reproduces the config exactly.
    std::string canonical() const;

    /// FNV-1a 64 over the canonical text. Stored in checkpoints so that
    /// evaluation can refuse a config that does not match the training run.
    std::uint64_t fingerprint() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& context);
RunConfig load_run_config(const std::string& path);

}  // namespace gaitma
