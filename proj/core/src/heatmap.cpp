#include "gaitma/heatmap.hpp"

#include <cmath>
#include <set>
#include <string>

#include "gaitma/errors.hpp"

namespace gaitma {

namespace {

// exp(-e) is below 1e-13 for e > 30; writing 0 there keeps the optimized
// limb path within 1e-12 of the per-pixel reference.
constexpr double kExpCutoff = 30.0;

void check_frame(const PoseFrame& frame) {
    for (std::size_t k = 0; k < frame.joints.size(); ++k) {
        const Joint& j = frame.joints[k];
        if (!std::isfinite(j.x) || !std::isfinite(j.y))
            throw InvalidArgument("heatmap: non-finite coordinate at joint " + std::to_string(k));
        if (!std::isfinite(j.confidence) || j.confidence < 0.0 || j.confidence > 1.0)
            throw InvalidArgument("heatmap: confidence outside [0,1] at joint " + std::to_string(k));
    }
}

void check_grid(double sigma, int height, int width) {
    if (!(sigma > 0.0)) throw InvalidArgument("heatmap: sigma must be > 0");
    if (height < 1 || width < 1) throw InvalidArgument("heatmap: H and W must be >= 1");
}

}  // namespace

void SkeletonTopology::validate() const {
    if (joint_count <= 0) throw InvalidArgument("topology: joint_count must be positive");
    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : limbs) {
        if (a < 0 || b < 0 || a >= joint_count || b >= joint_count)
            throw InvalidArgument("topology: limb index out of range (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ")");
        if (a == b) throw InvalidArgument("topology: limb endpoints must differ");
        auto key = std::minmax(a, b);
        if (!seen.insert(key).second)
            throw InvalidArgument("topology: duplicate limb (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    }
}

SkeletonTopology default_topology() {
    // COCO order: 0 nose, 1/2 eyes, 3/4 ears, 5/6 shoulders, 7/8 elbows,
    // 9/10 wrists, 11/12 hips, 13/14 knees, 15/16 ankles.
    SkeletonTopology topo;
    topo.joint_count = 17;
    topo.limbs = {
        {5, 7},  {7, 9},   {6, 8},   {8, 10},  // arms
        {11, 13}, {13, 15}, {12, 14}, {14, 16},  // legs
        {5, 6},  {11, 12},                      // shoulder / hip connectors
        {5, 11}, {6, 12},                       // torso sides
    };
    return topo;
}

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax;
    const double dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) {
        t = ((px - ax) * dx + (py - ay) * dy) / len2;
        t = std::clamp(t, 0.0, 1.0);
    }
    const double cx = ax + t * dx;
    const double cy = ay + t * dy;
    return std::hypot(px - cx, py - cy);
}

Tensor joint_heatmap(const PoseFrame& frame, double sigma, int height, int width) {
    check_grid(sigma, height, width);
    check_frame(frame);
    const int joints = frame.joint_count();
    Tensor out({joints, height, width});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> row_factor(static_cast<std::size_t>(height));
    std::vector<double> col_factor(static_cast<std::size_t>(width));
    for (int k = 0; k < joints; ++k) {
        const Joint& j = frame.joints[static_cast<std::size_t>(k)];
        if (j.confidence == 0.0) continue;  // slice stays zero
        // The squared exponent separates over axes, so the map is an outer
        // product of two 1-D Gaussian profiles.
        for (int i = 0; i < height; ++i) {
            const double d = i - j.x;
            row_factor[static_cast<std::size_t>(i)] = std::exp(-d * d * inv);
        }
        for (int c = 0; c < width; ++c) {
            const double d = c - j.y;
            col_factor[static_cast<std::size_t>(c)] = std::exp(-d * d * inv);
        }
        for (int i = 0; i < height; ++i) {
            const double rf = row_factor[static_cast<std::size_t>(i)] * j.confidence;
            double* dst = &out.at(k, i, 0);
            for (int c = 0; c < width; ++c) dst[c] = rf * col_factor[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

Tensor limb_heatmap(const PoseFrame& frame, const SkeletonTopology& topo, double sigma, int height, int width) {
    check_grid(sigma, height, width);
    check_frame(frame);
    topo.validate();
    if (frame.joint_count() != topo.joint_count)
        throw InvalidArgument("heatmap: frame has " + std::to_string(frame.joint_count()) +
                              " joints, topology expects " + std::to_string(topo.joint_count));
    const int limbs = topo.limb_count();
    Tensor out({limbs, height, width});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int k = 0; k < limbs; ++k) {
        const auto [a, b] = topo.limbs[static_cast<std::size_t>(k)];
        const Joint& ja = frame.joints[static_cast<std::size_t>(a)];
        const Joint& jb = frame.joints[static_cast<std::size_t>(b)];
        const double conf = std::min(ja.confidence, jb.confidence);
        if (conf == 0.0) continue;
        for (int i = 0; i < height; ++i) {
            double* dst = &out.at(k, i, 0);
            for (int c = 0; c < width; ++c) {
                const double d = point_segment_distance(i, c, ja.x, ja.y, jb.x, jb.y);
                const double e = d * d * inv;
                dst[c] = (e > kExpCutoff) ? 0.0 : std::exp(-e) * conf;
            }
        }
    }
    return out;
}

HeatmapVolume stack_sequence(const PoseSequence& frames, const SkeletonTopology& topo, double sigma, int height,
                             int width) {
    if (frames.empty()) throw InvalidArgument("stack_sequence: empty sequence");
    topo.validate();
    const int joints = topo.joint_count;
    for (std::size_t t = 0; t < frames.size(); ++t)
        if (frames[t].joint_count() != joints)
            throw InvalidArgument("stack_sequence: frame " + std::to_string(t) + " has " +
                                  std::to_string(frames[t].joint_count()) + " joints, expected " +
                                  std::to_string(joints));
    const int total = joints + topo.limb_count();
    const int frame_count = static_cast<int>(frames.size());
    HeatmapVolume vol{Tensor({frame_count, total, height, width})};
    const std::int64_t plane = static_cast<std::int64_t>(height) * width;
    for (int t = 0; t < frame_count; ++t) {
        Tensor jm = joint_heatmap(frames[static_cast<std::size_t>(t)], sigma, height, width);
        Tensor lm = limb_heatmap(frames[static_cast<std::size_t>(t)], topo, sigma, height, width);
        double* dst = &vol.values.at(t, 0, 0, 0);
        std::copy(jm.data(), jm.data() + jm.size(), dst);
        std::copy(lm.data(), lm.data() + lm.size(), dst + static_cast<std::int64_t>(joints) * plane);
    }
    return vol;
}

HeatmapVolume reference_stack_sequence(const PoseSequence& frames, const SkeletonTopology& topo, double sigma,
                                       int height, int width) {
    if (frames.empty()) throw InvalidArgument("stack_sequence: empty sequence");
    topo.validate();
    const int joints = topo.joint_count;
    const int limbs = topo.limb_count();
    const int frame_count = static_cast<int>(frames.size());
    HeatmapVolume vol{Tensor({frame_count, joints + limbs, height, width})};
    const double denom = 2.0 * sigma * sigma;
    for (int t = 0; t < frame_count; ++t) {
        const PoseFrame& frame = frames[static_cast<std::size_t>(t)];
        check_frame(frame);
        if (frame.joint_count() != joints)
            throw InvalidArgument("stack_sequence: frame " + std::to_string(t) + " joint count mismatch");
        for (int k = 0; k < joints; ++k) {
            const Joint& j = frame.joints[static_cast<std::size_t>(k)];
            for (int i = 0; i < height; ++i)
                for (int c = 0; c < width; ++c) {
                    const double dx = i - j.x;
                    const double dy = c - j.y;
                    vol.values.at(t, k, i, c) = std::exp(-(dx * dx + dy * dy) / denom) * j.confidence;
                }
        }
        for (int k = 0; k < limbs; ++k) {
            const auto [a, b] = topo.limbs[static_cast<std::size_t>(k)];
            const Joint& ja = frame.joints[static_cast<std::size_t>(a)];
            const Joint& jb = frame.joints[static_cast<std::size_t>(b)];
            const double conf = std::min(ja.confidence, jb.confidence);
            for (int i = 0; i < height; ++i)
                for (int c = 0; c < width; ++c) {
                    const double d = point_segment_distance(i, c, ja.x, ja.y, jb.x, jb.y);
                    vol.values.at(t, joints + k, i, c) = std::exp(-d * d / denom) * conf;
                }
        }
    }
    return vol;
}

}  // namespace gaitma
