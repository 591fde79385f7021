#include "gaitma/pose_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "gaitma/errors.hpp"

namespace gaitma {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& context) {
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw FormatError(context + ": invalid JSON");
    return j;
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw FormatError("heatmap file: truncated " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

PoseSequence read_pose_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pose file: " + path);
    PoseSequence seq;
    std::string line;
    int expected_joints = -1;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json j = parse_json(line, path + ":" + std::to_string(line_no));
        if (!j.is_object() || !j.contains("frame") || !j.contains("joints"))
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected {\"frame\", \"joints\"}");
        const int frame_idx = j["frame"].get<int>();
        const int expected_idx = static_cast<int>(seq.size());
        if (frame_idx != expected_idx)
            throw FormatError(path + ":" + std::to_string(line_no) + ": frame index " + std::to_string(frame_idx) +
                              ", expected consecutive index " + std::to_string(expected_idx));
        const json& joints = j["joints"];
        if (!joints.is_array())
            throw FormatError(path + ": frame " + std::to_string(frame_idx) + ": joints must be an array");
        if (expected_joints < 0) expected_joints = static_cast<int>(joints.size());
        if (static_cast<int>(joints.size()) != expected_joints)
            throw FormatError(path + ": frame " + std::to_string(frame_idx) + " has " +
                              std::to_string(joints.size()) + " joints, expected " + std::to_string(expected_joints));
        PoseFrame frame;
        frame.joints.reserve(joints.size());
        for (const json& triple : joints) {
            if (!triple.is_array() || triple.size() != 3)
                throw FormatError(path + ": frame " + std::to_string(frame_idx) + ": joint must be [x, y, c]");
            Joint jt{triple[0].get<double>(), triple[1].get<double>(), triple[2].get<double>()};
            if (!std::isfinite(jt.x) || !std::isfinite(jt.y))
                throw FormatError(path + ": frame " + std::to_string(frame_idx) + ": non-finite coordinate");
            if (!std::isfinite(jt.confidence) || jt.confidence < 0.0 || jt.confidence > 1.0)
                throw FormatError(path + ": frame " + std::to_string(frame_idx) + ": confidence outside [0,1]");
            frame.joints.push_back(jt);
        }
        seq.push_back(std::move(frame));
    }
    if (seq.empty()) throw FormatError(path + ": empty sequence");
    return seq;
}

void write_pose_jsonl(const PoseSequence& seq, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write pose file: " + path);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        json joints = json::array();
        for (const Joint& j : seq[t].joints) joints.push_back({j.x, j.y, j.confidence});
        json line = {{"frame", t}, {"joints", std::move(joints)}};
        out << line.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

SkeletonTopology read_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open topology file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j = parse_json(text, path);
    if (!j.is_object() || !j.contains("joint_count") || !j.contains("limbs"))
        throw FormatError(path + ": expected {\"joint_count\", \"limbs\"}");
    SkeletonTopology topo;
    topo.joint_count = j["joint_count"].get<int>();
    for (const json& pair : j["limbs"]) {
        if (!pair.is_array() || pair.size() != 2) throw FormatError(path + ": limb must be [a, b]");
        topo.limbs.emplace_back(pair[0].get<int>(), pair[1].get<int>());
    }
    try {
        topo.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(path + ": " + e.what());
    }
    return topo;
}

void write_topology(const SkeletonTopology& topo, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write topology file: " + path);
    json limbs = json::array();
    for (const auto& [a, b] : topo.limbs) limbs.push_back({a, b});
    json j = {{"joint_count", topo.joint_count}, {"limbs", std::move(limbs)}};
    out << j.dump(2) << "\n";
}

void write_heatmap_bin(const HeatmapVolume& vol, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write heatmap file: " + path);
    out.write("GMHM", 4);
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(vol.frames()));
    put_u32(out, static_cast<std::uint32_t>(vol.channels()));
    put_u32(out, static_cast<std::uint32_t>(vol.height()));
    put_u32(out, static_cast<std::uint32_t>(vol.width()));
    std::vector<float> buf(static_cast<std::size_t>(vol.values.size()));
    for (std::int64_t i = 0; i < vol.values.size(); ++i) buf[static_cast<std::size_t>(i)] =
        static_cast<float>(vol.values[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

HeatmapVolume read_heatmap_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open heatmap file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "GMHM", 4) != 0)
        throw FormatError(path + ": bad magic, expected GMHM");
    const std::uint32_t version = get_u32(in, "version");
    if (version != 1) throw FormatError(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t frames = get_u32(in, "T");
    const std::uint32_t channels = get_u32(in, "K");
    const std::uint32_t height = get_u32(in, "H");
    const std::uint32_t width = get_u32(in, "W");
    if (frames == 0 || channels == 0 || height == 0 || width == 0)
        throw FormatError(path + ": zero dimension in header");
    const std::uint64_t count = static_cast<std::uint64_t>(frames) * channels * height * width;
    if (count > (1ull << 31)) throw FormatError(path + ": implausible dimensions in header");
    std::vector<float> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::uint64_t>(in.gcount()) != count * sizeof(float))
        throw FormatError(path + ": truncated payload at offset " + std::to_string(24 + in.gcount()));
    HeatmapVolume vol{Tensor({static_cast<int>(frames), static_cast<int>(channels), static_cast<int>(height),
                              static_cast<int>(width)})};
    for (std::uint64_t i = 0; i < count; ++i) {
        const float v = buf[i];
        if (!(v >= 0.0f && v <= 1.0f))
            throw FormatError(path + ": value outside [0,1] at element " + std::to_string(i));
        vol.values[static_cast<std::int64_t>(i)] = static_cast<double>(v);
    }
    return vol;
}

}  // namespace gaitma
