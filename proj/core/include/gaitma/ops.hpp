#pragma once

#include <vector>

#include "gaitma/tape.hpp"

namespace gaitma::ops {

// ---------------------------------------------------------------------------
// Elementwise and reductions
// ---------------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double s);
Var relu(Var x);
Var sigmoid(Var x);

/// Elementwise square root. Inputs must be >= 0; the backward pass clamps the
/// slope near zero (the forward value stays exact) and reports a kink there.
Var sqrt_elem(Var x);

Var sum_all(Var x);

/// Copy with new dims; element count must match.
Var reshape(Var x, std::vector<int> dims);

// ---------------------------------------------------------------------------
// Matrix ops (rank 2)
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b, bool transpose_b = false);

/// x: N×Din, weight: Din×Dout, bias: Dout broadcast over rows.
Var linear(Var x, Var weight, Var bias);

Var transpose(Var x);

/// Row-wise exp-normalization with max subtraction; rows sum to 1.
Var softmax_rows(Var x);

/// Row-wise standardization (population variance + eps) then affine gain and
/// shift, both of length M.
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);

/// Per-column mean / population variance of an N×C matrix, both length C.
Var column_mean(Var x);
Var column_var(Var x);

// ---------------------------------------------------------------------------
// Shape surgery (any rank)
// ---------------------------------------------------------------------------

/// Inputs must agree on every axis except `axis`; output extent is the sum.
Var concat(const std::vector<Var>& xs, int axis);

/// Inverse of concat: sizes must sum to the extent of `axis`.
std::vector<Var> split(Var x, int axis, const std::vector<int>& sizes);

Var slice(Var x, int axis, int offset, int extent);

// ---------------------------------------------------------------------------
// Convolution (single sample; no batch axis)
// ---------------------------------------------------------------------------

/// x: Ci×T×H×W, kernels: Co×Ci×kt×k×k (all kernel extents odd, spatial
/// square). Cross-correlation with zero padding; output extents must be
/// integral or the op throws.
Var conv3d(Var x, Var kernels, Var bias, int stride_t, int stride_s, int pad_t, int pad_s);
Var conv3d(Var x, Var kernels, int stride_t, int stride_s, int pad_t, int pad_s);

/// x: Ci×T×H×W, kernels: Co×Ci×k×k applied to every frame with shared
/// parameters (equivalent to conv3d with a length-1 temporal kernel).
Var conv2d_seq(Var x, Var kernels, Var bias, int stride, int pad);
Var conv2d_seq(Var x, Var kernels, int stride, int pad);

/// x: Ci×H×W, kernels: Co×Ci×k×k.
Var conv2d(Var x, Var kernels, Var bias, int stride, int pad);
Var conv2d(Var x, Var kernels, int stride, int pad);

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

enum class PoolKind { kMax, kMean };

/// Tiles each listed axis by `window` and reduces every tile. With
/// truncate_remainder the trailing partial tile is dropped, otherwise the
/// window must divide the extent. Multi-axis pooling applies the axes in
/// ascending order (equivalent to block pooling for max, and for mean up to
/// rounding).
Var pool(Var x, PoolKind kind, std::vector<int> axes, int window, bool truncate_remainder = true);

// ---------------------------------------------------------------------------
// Per-part projection
// ---------------------------------------------------------------------------

/// x: P×Cin, weights: P×Cin×Cout; row p of the output is row p of x times
/// weight slab p. No bias.
Var part_linear(Var x, Var weights);

// ---------------------------------------------------------------------------
// Fused loss heads
// ---------------------------------------------------------------------------

/// Mean over rows of -log softmax(logits)[label], log-sum-exp stabilized.
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

struct TripletStats {
    int valid = 0;       ///< triplets with a valid (anchor, positive, negative) label pattern
    int active = 0;      ///< triplets with a positive hinge value
    bool degenerate = false;  ///< no valid triplet existed; loss defined as 0
};

/// Batch-all triplet hinge over Euclidean distances, averaged over the
/// active (non-zero) triplets only. A batch with no valid triplet yields 0
/// and sets the degenerate flag instead of throwing.
Var triplet_batch_all(Var embeddings, const std::vector<int>& labels, double margin, TripletStats* stats = nullptr);

}  // namespace gaitma::ops
