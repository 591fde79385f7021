#pragma once

#include <string>

#include "gaitma/heatmap.hpp"

namespace gaitma {

/// Pose file format: JSON lines, each `{"frame": t, "joints": [[x,y,c], ...]}`
/// with frame indices consecutive from 0 and a fixed joint count.
PoseSequence read_pose_jsonl(const std::string& path);
void write_pose_jsonl(const PoseSequence& seq, const std::string& path);

/// Topology file: JSON `{"joint_count": K, "limbs": [[a,b], ...]}`.
SkeletonTopology read_topology(const std::string& path);
void write_topology(const SkeletonTopology& topo, const std::string& path);

/// Heatmap volume file: magic "GMHM"; five little-endian u32 (version=1, T,
/// K_total, H, W); then T*K*H*W little-endian IEEE-754 float32 values in
/// row-major (t, k, i, j) order, i indexing height. Values are rounded from
/// the 64-bit generation result to 32 bits on write.
void write_heatmap_bin(const HeatmapVolume& vol, const std::string& path);
HeatmapVolume read_heatmap_bin(const std::string& path);

}  // namespace gaitma
