#pragma once

#include <string>

#include "gaitma/ops.hpp"
#include "gaitma/random.hpp"
#include "gaitma/tape.hpp"

namespace gaitma {

/// Co-attention alignment: two shared fully-connected layers with a
/// bottleneck of ratio r score each element of the concatenated part
/// features, and the sigmoid gate re-weights them residually.
/// Registers ω1: 2C×2C/r, b1, ω2: 2C/r×2C, b2 under `prefix`.
void register_cam_params(ParameterStore& store, const std::string& prefix, int c, int reduction, Rng& rng);

/// y_sil, y_ske: P×C. Returns Y_align = sigmoid(relu(Y_m·ω1+b1)·ω2+b2) ⊗ Y_m + Y_m
/// with Y_m the P×2C channel concatenation.
Var cam_forward(Tape& tape, ParameterStore& store, const std::string& prefix, Var y_sil, Var y_ske);

/// Mutual learning: per-direction layer-norm gain/shift of length C.
void register_mlm_params(ParameterStore& store, const std::string& prefix, int c, Rng& rng);

struct MlmOut {
    Var y1;
    Var y2;
};

/// Symmetric scaled dot-product attention over parts:
///   Y1' = LayerNorm(softmax(Y1·Y2ᵀ/√d)·Y2 + Y1), and Y2' with roles swapped.
/// d defaults to the channel count when passed as 0.
MlmOut mlm_forward(Tape& tape, ParameterStore& store, const std::string& prefix, Var y1, Var y2, double d = 0.0);

/// Per-part channel concatenation of the two refined matrices: P×C + P×C → P×2C.
Var fuse_output(Var y1, Var y2);

}  // namespace gaitma
