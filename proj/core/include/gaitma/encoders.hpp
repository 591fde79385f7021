#pragma once

#include <string>
#include <vector>

#include "gaitma/ops.hpp"
#include "gaitma/random.hpp"
#include "gaitma/tape.hpp"

namespace gaitma {

/// Architecture of the two branch backbones and the shared part layout.
struct BackboneConfig {
    std::vector<int> sil_stages = {16, 32, 64};  ///< silhouette branch widths per stage
    std::vector<int> ske_stages = {16, 32, 64};  ///< skeleton branch widths per stage
    int part_count = 8;                          ///< P horizontal strips
    int embed_dim = 64;                          ///< C channels per part after projection
    int sil_height = 64, sil_width = 44;
    int ske_height = 64, ske_width = 44;

    void validate() const;
};

/// Spatial extent after `stages` rounds of 2×2 pooling with truncation.
int pooled_extent(int extent, int stages);

/// Registers conv weights/biases for one branch. `temporal` selects 3×3×3
/// kernels (silhouette branch) over per-frame 3×3 (skeleton branch). Each
/// stage is conv→ReLU→conv plus a 1×1 projection skip, then ReLU and 2×2
/// spatial max-pooling.
void register_branch_params(ParameterStore& store, const std::string& prefix, bool temporal, int in_channels,
                            const std::vector<int>& stages, Rng& rng);

/// Runs a branch on x: Cin×T×H×W, returning C_last×T×H'×W'.
Var encode_branch(Tape& tape, ParameterStore& store, const std::string& prefix, bool temporal, Var x,
                  const std::vector<int>& stages);

/// Splits height into `parts` contiguous strips (sizes differ by at most 1,
/// earlier strips take the remainder) and reduces each strip and frame to a
/// C-vector by summing its spatial max-pool and mean-pool. fmap: C×T×H×W,
/// result: T×P×C.
Var horizontal_mapping(Var fmap, int parts);

/// Elementwise max over the frame axis. x: T×P×C, result: P×C.
Var temporal_aggregate(Var x);

/// Per-part linear maps (P independent Cin×Cout weights, no bias).
void register_part_projection(ParameterStore& store, const std::string& name, int parts, int cin, int cout, Rng& rng);
Var part_projection(Tape& tape, ParameterStore& store, const std::string& name, Var x);

}  // namespace gaitma
