#include "gaitma/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "gaitma/errors.hpp"
#include "gaitma/pose_io.hpp"

namespace gaitma {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kCanonicalRows = 64.0;
constexpr double kCanonicalCols = 44.0;

int require_int(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw FormatError(ctx + ": missing integer field '" + key + "'");
    return j[key].get<int>();
}

std::string require_str(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_string())
        throw FormatError(ctx + ": missing string field '" + key + "'");
    return j[key].get<std::string>();
}

}  // namespace

DatasetIndex load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + manifest_path);
    json m = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (m.is_discarded()) throw FormatError(manifest_path + ": invalid JSON");
    const std::string ctx = manifest_path;
    if (!m.contains("format") || m["format"] != "gaitma-dataset")
        throw FormatError(ctx + ": not a dataset manifest");

    DatasetIndex idx;
    idx.root = fs::path(manifest_path).parent_path().string();
    if (!m.contains("seed") || !m["seed"].is_number_unsigned()) throw FormatError(ctx + ": missing seed");
    idx.seed = m["seed"].get<std::uint64_t>();
    idx.identities = require_int(m, "identities", ctx);
    idx.sequences_per_identity = require_int(m, "sequences_per_identity", ctx);
    idx.frames = require_int(m, "frames", ctx);
    idx.height = require_int(m, "height", ctx);
    idx.width = require_int(m, "width", ctx);
    if (idx.identities < 1 || idx.frames < 1 || idx.height < 1 || idx.width < 1)
        throw FormatError(ctx + ": non-positive dataset dimensions");

    idx.topology = read_topology((fs::path(idx.root) / "topology.json").string());

    if (!m.contains("sequences") || !m["sequences"].is_array()) throw FormatError(ctx + ": missing sequence list");
    idx.by_identity.assign(static_cast<std::size_t>(idx.identities), {});
    for (const json& s : m["sequences"]) {
        SequenceRef ref;
        ref.identity = require_int(s, "identity", ctx);
        ref.sequence = require_int(s, "sequence", ctx);
        ref.pose_path = (fs::path(idx.root) / require_str(s, "pose", ctx)).string();
        ref.sil_dir = (fs::path(idx.root) / require_str(s, "silhouette_dir", ctx)).string();
        ref.frames = require_int(s, "frames", ctx);
        ref.corrupted = s.contains("corrupted") && s["corrupted"].is_boolean() && s["corrupted"].get<bool>();
        if (ref.identity < 0 || ref.identity >= idx.identities)
            throw FormatError(ctx + ": sequence references identity " + std::to_string(ref.identity) +
                              " outside [0," + std::to_string(idx.identities) + ")");
        if (ref.frames < 1) throw FormatError(ctx + ": sequence with no frames");
        idx.by_identity[static_cast<std::size_t>(ref.identity)].push_back(
            static_cast<int>(idx.sequences.size()));
        idx.sequences.push_back(std::move(ref));
    }
    if (idx.sequences.empty()) throw FormatError(ctx + ": empty sequence list");
    for (int i = 0; i < idx.identities; ++i)
        if (idx.by_identity[static_cast<std::size_t>(i)].empty())
            throw FormatError(ctx + ": identity " + std::to_string(i) + " has no sequences");
    return idx;
}

RawSequence load_sequence(const DatasetIndex& idx, int sequence_index) {
    if (sequence_index < 0 || sequence_index >= static_cast<int>(idx.sequences.size()))
        throw InvalidArgument("load_sequence: index out of range");
    const SequenceRef& ref = idx.sequences[static_cast<std::size_t>(sequence_index)];
    RawSequence raw;
    raw.poses = read_pose_jsonl(ref.pose_path);
    if (static_cast<int>(raw.poses.size()) != ref.frames)
        throw FormatError(ref.pose_path + ": frame count disagrees with the manifest");
    raw.silhouettes.reserve(raw.poses.size());
    for (int t = 0; t < ref.frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06d.pgm", t);
        Tensor sil = read_pgm((fs::path(ref.sil_dir) / name).string());
        if (sil.dim(0) != idx.height || sil.dim(1) != idx.width)
            throw FormatError(std::string(name) + ": silhouette resolution disagrees with the manifest");
        raw.silhouettes.push_back(std::move(sil));
    }
    return raw;
}

std::vector<int> sample_clip_indices(int total, int clip_len, Rng& rng) {
    if (total < 1 || clip_len < 1) throw InvalidArgument("sample_clip_indices: counts must be >= 1");
    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(clip_len));
    if (total >= clip_len) {
        std::vector<int> pool(static_cast<std::size_t>(total));
        for (int i = 0; i < total; ++i) pool[static_cast<std::size_t>(i)] = i;
        for (int i = 0; i < clip_len; ++i) {
            int j = i + uniform_int(rng, 0, total - 1 - i);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            picked.push_back(pool[static_cast<std::size_t>(i)]);
        }
    } else {
        for (int i = 0; i < clip_len; ++i) picked.push_back(uniform_int(rng, 0, total - 1));
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

GaitMAModel::SampleInput assemble_sample(const RawSequence& raw, const std::vector<int>& frame_indices,
                                         const SkeletonTopology& topo, double sigma, int sil_h, int sil_w,
                                         int ske_h, int ske_w) {
    if (frame_indices.empty()) throw InvalidArgument("assemble_sample: empty frame selection");
    const int total = static_cast<int>(raw.poses.size());
    if (static_cast<int>(raw.silhouettes.size()) != total)
        throw InvalidArgument("assemble_sample: pose/silhouette length mismatch");

    const int T = static_cast<int>(frame_indices.size());
    GaitMAModel::SampleInput out;
    out.silhouette = Tensor({1, T, sil_h, sil_w});
    PoseSequence scaled;
    scaled.reserve(static_cast<std::size_t>(T));
    const double sr = ske_h / kCanonicalRows;
    const double sc = ske_w / kCanonicalCols;
    for (int t = 0; t < T; ++t) {
        int f = frame_indices[static_cast<std::size_t>(t)];
        if (f < 0 || f >= total) throw InvalidArgument("assemble_sample: frame index out of range");
        const Tensor& sil = raw.silhouettes[static_cast<std::size_t>(f)];
        if (sil.dim(0) != sil_h || sil.dim(1) != sil_w)
            throw InvalidArgument("assemble_sample: silhouette resolution does not match the model");
        for (int i = 0; i < sil_h; ++i)
            for (int j = 0; j < sil_w; ++j) out.silhouette.at(0, t, i, j) = sil.at(i, j);
        PoseFrame frame = raw.poses[static_cast<std::size_t>(f)];
        for (Joint& jt : frame.joints) {
            jt.x *= sr;
            jt.y *= sc;
        }
        scaled.push_back(std::move(frame));
    }

    HeatmapVolume vol = stack_sequence(scaled, topo, sigma, ske_h, ske_w);  // (T, K, H, W)
    const int K = vol.channels();
    out.heatmaps = Tensor({K, T, ske_h, ske_w});
    for (int t = 0; t < T; ++t)
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < ske_h; ++i)
                for (int j = 0; j < ske_w; ++j) out.heatmaps.at(k, t, i, j) = vol.values.at(t, k, i, j);
    return out;
}

}  // namespace gaitma
