#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gaitma/heatmap.hpp"
#include "gaitma/model.hpp"
#include "gaitma/random.hpp"
#include "gaitma/synthgait.hpp"

namespace gaitma {

struct SequenceRef {
    int identity = 0;
    int sequence = 0;
    std::string pose_path;  // absolute
    std::string sil_dir;    // absolute
    int frames = 0;
    bool corrupted = false;
};

/// Parsed manifest with per-identity grouping. Sequence order follows the
/// manifest; `by_identity[i]` lists indices into `sequences`.
struct DatasetIndex {
    std::string root;
    std::uint64_t seed = 0;
    int identities = 0;
    int sequences_per_identity = 0;
    int frames = 0;
    int height = 0;
    int width = 0;
    SkeletonTopology topology;
    std::vector<SequenceRef> sequences;
    std::vector<std::vector<int>> by_identity;
};

DatasetIndex load_dataset(const std::string& manifest_path);

struct RawSequence {
    PoseSequence poses;
    SilhouetteSequence silhouettes;
};

RawSequence load_sequence(const DatasetIndex& idx, int sequence_index);

/// Ascending frame indices for a training clip: a uniform subset without
/// replacement when the sequence is long enough, otherwise uniform draws with
/// replacement. Consumes a fixed number of rng values per call for a given
/// (total, clip_len), which keeps parallel replays aligned.
std::vector<int> sample_clip_indices(int total, int clip_len, Rng& rng);

/// Model input for selected frames: the silhouette volume plus the stacked
/// joint/limb heatmaps rendered at the skeleton resolution (pose coordinates
/// are rescaled from the dataset's canonical 64x44 frame). The dataset's
/// silhouette resolution must equal (sil_h, sil_w).
GaitMAModel::SampleInput assemble_sample(const RawSequence& raw, const std::vector<int>& frame_indices,
                                         const SkeletonTopology& topo, double sigma, int sil_h, int sil_w,
                                         int ske_h, int ske_w);

}  // namespace gaitma
