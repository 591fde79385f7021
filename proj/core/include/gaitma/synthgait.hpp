#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gaitma/heatmap.hpp"
#include "gaitma/random.hpp"
#include "gaitma/tensor.hpp"

namespace gaitma {

/// Body-shape and gait parameters for one synthetic subject. Lengths and
/// widths are in pixels of the canonical 64x44 frame (the height scale is
/// already folded in); rasterization rescales them for other resolutions.
struct IdentityParams {
    double torso_len = 0.0;
    double upper_arm = 0.0;
    double lower_arm = 0.0;
    double upper_leg = 0.0;
    double lower_leg = 0.0;

    double arm_width = 0.0;
    double leg_width = 0.0;
    double torso_width = 0.0;
    double head_radius = 0.0;

    double gait_freq = 0.0;  // radians per frame
    double leg_swing = 0.0;  // amplitudes, radians, in (0, pi/2)
    double knee_swing = 0.0;
    double arm_swing = 0.0;

    double height_scale = 1.0;

    /// Lengths/widths positive, amplitudes in (0, pi/2), frequency positive.
    void validate() const;
};

/// Draws parameters from fixed documented ranges; deterministic per seed.
IdentityParams generate_identity(std::uint64_t seed);

/// L-infinity distance between the two limb-length vectors
/// (torso, upper/lower arm, upper/lower leg).
double limb_length_gap(const IdentityParams& a, const IdentityParams& b);

/// Draws `count` identities whose limb-length vectors pairwise differ by at
/// least `min_gap` pixels (rejection sampling), so the retrieval task stays
/// solvable by construction. Deterministic per seed.
std::vector<IdentityParams> generate_identities(std::uint64_t seed, int count, double min_gap = 1.5);

/// Sinusoidal articulated walker, 17 joints in COCO order, side view facing
/// the +column direction. Hips and shoulders oscillate at the gait frequency
/// with identity amplitudes, left/right anti-phase; positions follow by
/// forward kinematics from the pelvis. Confidences are 1.0. All joints lie
/// inside the canonical 64x44 frame.
PoseSequence render_pose_sequence(const IdentityParams& params, int frames, double phase);

/// Binary body mask: union of limb capsules (width = limb width), a torso
/// ellipse and a head disc, anti-aliased over a one-pixel band and then
/// thresholded at 0.5. The frame's joints are taken in canonical 64x44
/// coordinates and rescaled to (height, width).
Tensor rasterize_silhouette(const PoseFrame& frame, const IdentityParams& params, int height, int width);

using SilhouetteSequence = std::vector<Tensor>;  // rank-2 masks, values 0/1

struct OcclusionRect {
    int row0 = 0;
    int col0 = 0;
    int height = 0;
    int width = 0;
    double probability = 0.0;  // per-frame firing probability
};

struct CorruptionSpec {
    std::vector<OcclusionRect> occluders;
    double dropout_probability = 0.0;  // per-frame whole-silhouette dropout
    double confidence_noise = 0.5;     // scale-down amplitude for occluded keypoints

    void validate() const;  // probabilities in [0,1], noise in [0,1], rects non-empty
    bool empty() const { return occluders.empty() && dropout_probability == 0.0; }
};

/// Applies occlusion in place. Per frame, in declaration order, each occluder
/// fires independently: silhouette pixels inside the rectangle are zeroed and
/// every keypoint inside it has its confidence scaled by (1 - noise * u),
/// u ~ U(0,1). A fired dropout zeros the whole silhouette frame. Pose
/// coordinates are never modified. Returns the number of fired events.
int apply_corruption(PoseSequence& poses, SilhouetteSequence& sils, const CorruptionSpec& spec, Rng& rng);

/// Silhouette frame files: binary PGM (P5), 8-bit. Writing maps [0,1] to
/// 0..255; reading maps back by dividing by maxval.
void write_pgm(const Tensor& image, const std::string& path);
Tensor read_pgm(const std::string& path);

struct DatasetBuildConfig {
    int identities = 8;
    int sequences_per_identity = 4;
    int frames = 24;
    int height = 64;
    int width = 44;
    double min_identity_gap = 1.5;
    CorruptionSpec corruption;  // applied to every sequence; default fires nothing
    std::uint64_t seed = 0;

    void validate() const;  // counts and dims >= 1
};

/// Writes topology.json, per-sequence pose.jsonl + sil/NNNNNN.pgm trees and a
/// manifest.json tying them together. Every random draw comes from a stream
/// derived from (seed, identity, sequence), so rebuilding with the same
/// config is byte-identical. Returns the manifest path.
std::string build_dataset(const DatasetBuildConfig& cfg, const std::string& out_dir);

}  // namespace gaitma
