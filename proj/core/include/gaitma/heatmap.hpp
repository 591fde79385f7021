#pragma once

#include <vector>

#include "gaitma/tensor.hpp"

namespace gaitma {

/// One 2D keypoint. `x` is the row coordinate (down the height axis), `y` the
/// column coordinate; heatmap cell (i, j) compares i against x and j against y.
struct Joint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;
};

struct PoseFrame {
    std::vector<Joint> joints;

    int joint_count() const { return static_cast<int>(joints.size()); }
};

using PoseSequence = std::vector<PoseFrame>;

/// Skeleton wiring: which joint index pairs form limbs.
struct SkeletonTopology {
    int joint_count = 0;
    std::vector<std::pair<int, int>> limbs;

    int limb_count() const { return static_cast<int>(limbs.size()); }

    /// Throws InvalidArgument on out-of-range indices, self-loops or
    /// duplicate (unordered) pairs.
    void validate() const;
};

/// COCO-style 17-joint body with 12 limbs: four two-segment limbs, the
/// shoulder and hip connectors, and the two torso sides.
SkeletonTopology default_topology();

struct GaussianParams {
    double sigma = 2.0;  // pixels
};

/// Euclidean distance from p to the closed segment [a, b]; distance to the
/// point when a == b.
double point_segment_distance(double px, double py, double ax, double ay, double bx, double by);

/// Per-joint Gaussian maps: out[k][i][j] = exp(-((i-x_k)^2+(j-y_k)^2)/(2 sigma^2)) * c_k.
/// Result dims (K, H, W).
Tensor joint_heatmap(const PoseFrame& frame, double sigma, int height, int width);

/// Per-limb maps: out[k][i][j] = exp(-D((i,j), seg_k)^2/(2 sigma^2)) * min(c_a, c_b).
/// Result dims (K_limbs, H, W).
Tensor limb_heatmap(const PoseFrame& frame, const SkeletonTopology& topo, double sigma, int height, int width);

/// Stacked joint+limb volume for a whole sequence, dims (T, K_joints + K_limbs, H, W);
/// joint channels first, limb channels after, in topology order.
struct HeatmapVolume {
    Tensor values;  // rank 4: (T, K_total, H, W)

    int frames() const { return values.dim(0); }
    int channels() const { return values.dim(1); }
    int height() const { return values.dim(2); }
    int width() const { return values.dim(3); }
};

HeatmapVolume stack_sequence(const PoseSequence& frames, const SkeletonTopology& topo, double sigma, int height,
                             int width);

/// Straight per-pixel evaluation of the same maps, no factorization or
/// cutoffs. Backs the CLI --verify-oracle mode; kept separate from the
/// optimized path above.
HeatmapVolume reference_stack_sequence(const PoseSequence& frames, const SkeletonTopology& topo, double sigma,
                                       int height, int width);

}  // namespace gaitma
