#include "gaitma/synthgait.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "gaitma/errors.hpp"
#include "gaitma/pose_io.hpp"

namespace gaitma {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kBaseRows = 64.0;
constexpr double kBaseCols = 44.0;
constexpr double kPi = std::numbers::pi;

// Sampling ranges at the canonical 64-row scale, before the height scale.
struct Range {
    double lo, hi;
};
constexpr Range kTorsoLen{16.0, 21.0};
constexpr Range kUpperArm{7.0, 10.0};
constexpr Range kLowerArm{6.0, 9.0};
constexpr Range kUpperLeg{9.0, 12.5};
constexpr Range kLowerLeg{9.0, 12.5};
constexpr Range kArmWidth{2.0, 3.2};
constexpr Range kLegWidth{2.6, 4.2};
constexpr Range kTorsoWidth{7.0, 10.0};
constexpr Range kHeadRadius{2.6, 3.6};
constexpr Range kGaitFreq{0.25, 0.45};
constexpr Range kLegSwing{0.35, 0.65};
constexpr Range kKneeSwing{0.30, 0.60};
constexpr Range kArmSwing{0.25, 0.50};
constexpr Range kHeightScale{0.92, 1.08};

double draw(Rng& rng, Range r) { return uniform_real(rng, r.lo, r.hi); }

void require_positive(double v, const char* what) {
    if (!(v > 0.0)) throw InvalidArgument(std::string("identity params: ") + what + " must be positive");
}

struct Pt {
    double x, y;  // row, col
};

Pt polar(Pt from, double len, double angle) {
    // angle measured from straight down (+row), positive toward +col.
    return {from.x + len * std::cos(angle), from.y + len * std::sin(angle)};
}

// Capsule and disc primitives share the signed-distance interface: negative
// inside, with the anti-aliasing band spanning one pixel around zero.
struct Capsule {
    Pt a, b;
    double radius;

    double sdist(double px, double py) const {
        return point_segment_distance(px, py, a.x, a.y, b.x, b.y) - radius;
    }
};

struct Ellipse {
    Pt center;
    double semi_row, semi_col;

    double sdist(double px, double py) const {
        double v = std::hypot((px - center.x) / semi_row, (py - center.y) / semi_col);
        return (v - 1.0) * std::min(semi_row, semi_col);
    }
};

bool inside_rect(double x, double y, const OcclusionRect& r) {
    return x >= r.row0 && x < r.row0 + r.height && y >= r.col0 && y < r.col0 + r.width;
}

std::string seq_rel_dir(int identity, int sequence) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "id%03d/seq%02d", identity, sequence);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

void IdentityParams::validate() const {
    require_positive(torso_len, "torso length");
    require_positive(upper_arm, "upper arm length");
    require_positive(lower_arm, "lower arm length");
    require_positive(upper_leg, "upper leg length");
    require_positive(lower_leg, "lower leg length");
    require_positive(arm_width, "arm width");
    require_positive(leg_width, "leg width");
    require_positive(torso_width, "torso width");
    require_positive(head_radius, "head radius");
    require_positive(gait_freq, "gait frequency");
    require_positive(height_scale, "height scale");
    for (double amp : {leg_swing, knee_swing, arm_swing})
        if (!(amp > 0.0 && amp < kPi / 2.0))
            throw InvalidArgument("identity params: swing amplitudes must lie in (0, pi/2)");
}

IdentityParams generate_identity(std::uint64_t seed) {
    Rng rng(seed);
    IdentityParams p;
    p.torso_len = draw(rng, kTorsoLen);
    p.upper_arm = draw(rng, kUpperArm);
    p.lower_arm = draw(rng, kLowerArm);
    p.upper_leg = draw(rng, kUpperLeg);
    p.lower_leg = draw(rng, kLowerLeg);
    p.arm_width = draw(rng, kArmWidth);
    p.leg_width = draw(rng, kLegWidth);
    p.torso_width = draw(rng, kTorsoWidth);
    p.head_radius = draw(rng, kHeadRadius);
    p.gait_freq = draw(rng, kGaitFreq);
    p.leg_swing = draw(rng, kLegSwing);
    p.knee_swing = draw(rng, kKneeSwing);
    p.arm_swing = draw(rng, kArmSwing);
    p.height_scale = draw(rng, kHeightScale);
    for (double* len : {&p.torso_len, &p.upper_arm, &p.lower_arm, &p.upper_leg, &p.lower_leg, &p.arm_width,
                        &p.leg_width, &p.torso_width, &p.head_radius})
        *len *= p.height_scale;
    p.validate();
    return p;
}

double limb_length_gap(const IdentityParams& a, const IdentityParams& b) {
    double gap = 0.0;
    gap = std::max(gap, std::fabs(a.torso_len - b.torso_len));
    gap = std::max(gap, std::fabs(a.upper_arm - b.upper_arm));
    gap = std::max(gap, std::fabs(a.lower_arm - b.lower_arm));
    gap = std::max(gap, std::fabs(a.upper_leg - b.upper_leg));
    gap = std::max(gap, std::fabs(a.lower_leg - b.lower_leg));
    return gap;
}

std::vector<IdentityParams> generate_identities(std::uint64_t seed, int count, double min_gap) {
    if (count < 1) throw InvalidArgument("generate_identities: count must be >= 1");
    if (min_gap < 0.0) throw InvalidArgument("generate_identities: negative gap");
    std::vector<IdentityParams> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt > 20000)
                throw ContractError("generate_identities: cannot place identity " + std::to_string(i) +
                                    " with the requested gap; lower the count or the gap");
            IdentityParams cand = generate_identity(mix_seed(seed, static_cast<std::uint64_t>(i), attempt));
            bool clear = true;
            for (const IdentityParams& prev : out)
                if (limb_length_gap(cand, prev) < min_gap) {
                    clear = false;
                    break;
                }
            if (clear) {
                out.push_back(cand);
                break;
            }
        }
    }
    return out;
}

PoseSequence render_pose_sequence(const IdentityParams& p, int frames, double phase) {
    p.validate();
    if (frames < 1) throw InvalidArgument("render_pose_sequence: need at least one frame");

    PoseSequence seq;
    seq.reserve(static_cast<std::size_t>(frames));
    const double r = p.head_radius;
    for (int t = 0; t < frames; ++t) {
        double phi = phase + p.gait_freq * t;   // right-side phase
        double phi_l = phi + kPi;               // left limbs run half a cycle behind

        double theta_r = p.leg_swing * std::sin(phi);
        double theta_l = p.leg_swing * std::sin(phi_l);
        double knee_r = p.knee_swing * 0.5 * (1.0 - std::cos(phi));
        double knee_l = p.knee_swing * 0.5 * (1.0 - std::cos(phi_l));
        double alpha_r = p.arm_swing * std::sin(phi_l);  // arms counter the same-side leg
        double alpha_l = p.arm_swing * std::sin(phi);
        double elbow_r = 0.2 + 0.25 * p.arm_swing * (1.0 - std::cos(phi_l));
        double elbow_l = 0.2 + 0.25 * p.arm_swing * (1.0 - std::cos(phi));

        double bob = 0.8 * p.leg_swing * std::sin(phi) * std::sin(phi);
        Pt pelvis{0.5 * kBaseRows - bob, 0.5 * kBaseCols};
        Pt neck{pelvis.x - p.torso_len, pelvis.y};
        Pt hip_l{pelvis.x, pelvis.y - 0.6};
        Pt hip_r{pelvis.x, pelvis.y + 0.6};
        Pt sho_l{neck.x, neck.y - 0.8};
        Pt sho_r{neck.x, neck.y + 0.8};

        Pt knee_lp = polar(hip_l, p.upper_leg, theta_l);
        Pt knee_rp = polar(hip_r, p.upper_leg, theta_r);
        Pt ankle_lp = polar(knee_lp, p.lower_leg, theta_l - knee_l);
        Pt ankle_rp = polar(knee_rp, p.lower_leg, theta_r - knee_r);
        Pt elbow_lp = polar(sho_l, p.upper_arm, alpha_l);
        Pt elbow_rp = polar(sho_r, p.upper_arm, alpha_r);
        Pt wrist_lp = polar(elbow_lp, p.lower_arm, alpha_l + elbow_l);
        Pt wrist_rp = polar(elbow_rp, p.lower_arm, alpha_r + elbow_r);

        Pt head{neck.x - (r + 1.5), neck.y};
        Pt nose{head.x + 0.15 * r, head.y + 0.9 * r};
        Pt eye_l{head.x - 0.3 * r, head.y + 0.45 * r};
        Pt eye_r{head.x - 0.3 * r, head.y + 0.6 * r};
        Pt ear_l{head.x - 0.1 * r, head.y - 0.35 * r};
        Pt ear_r{head.x - 0.1 * r, head.y - 0.2 * r};

        PoseFrame frame;
        for (Pt pt : {nose, eye_l, eye_r, ear_l, ear_r, sho_l, sho_r, elbow_lp, elbow_rp, wrist_lp, wrist_rp,
                      hip_l, hip_r, knee_lp, knee_rp, ankle_lp, ankle_rp})
            frame.joints.push_back({pt.x, pt.y, 1.0});
        seq.push_back(std::move(frame));
    }
    return seq;
}

Tensor rasterize_silhouette(const PoseFrame& frame, const IdentityParams& p, int height, int width) {
    p.validate();
    if (height < 1 || width < 1) throw InvalidArgument("rasterize_silhouette: dims must be >= 1");
    if (frame.joint_count() != 17) throw InvalidArgument("rasterize_silhouette: expected 17 joints");

    const double sr = height / kBaseRows;
    const double sc = width / kBaseCols;
    auto at = [&](int k) { return Pt{frame.joints[static_cast<std::size_t>(k)].x * sr,
                                     frame.joints[static_cast<std::size_t>(k)].y * sc}; };

    std::vector<Capsule> caps;
    const double aw = 0.5 * p.arm_width * sr;
    const double lw = 0.5 * p.leg_width * sr;
    for (auto [a, b, rad] : {std::tuple{5, 7, aw}, {7, 9, aw}, {6, 8, aw}, {8, 10, aw},
                             {11, 13, lw}, {13, 15, lw}, {12, 14, lw}, {14, 16, lw}})
        caps.push_back({at(a), at(b), rad});

    Pt neck{0.5 * (at(5).x + at(6).x), 0.5 * (at(5).y + at(6).y)};
    Pt pelvis{0.5 * (at(11).x + at(12).x), 0.5 * (at(11).y + at(12).y)};
    Pt head{0.0, 0.0};
    for (int k = 0; k < 5; ++k) {
        head.x += at(k).x / 5.0;
        head.y += at(k).y / 5.0;
    }
    caps.push_back({head, neck, aw});

    Ellipse torso{{0.5 * (neck.x + pelvis.x), 0.5 * (neck.y + pelvis.y)},
                  0.5 * std::fabs(pelvis.x - neck.x) + 0.25 * p.leg_width * sr,
                  0.5 * p.torso_width * sr};
    Ellipse skull{head, p.head_radius * sr, p.head_radius * sr};

    Tensor mask({height, width});
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            double px = i, py = j;
            double sd = torso.sdist(px, py);
            sd = std::min(sd, skull.sdist(px, py));
            for (const Capsule& c : caps) sd = std::min(sd, c.sdist(px, py));
            double coverage = std::clamp(0.5 - sd, 0.0, 1.0);
            mask.at(i, j) = coverage >= 0.5 ? 1.0 : 0.0;
        }
    return mask;
}

void CorruptionSpec::validate() const {
    for (const OcclusionRect& r : occluders) {
        if (r.height < 1 || r.width < 1) throw InvalidArgument("corruption: occluder rectangle must be non-empty");
        if (r.probability < 0.0 || r.probability > 1.0)
            throw InvalidArgument("corruption: occluder probability outside [0,1]");
    }
    if (dropout_probability < 0.0 || dropout_probability > 1.0)
        throw InvalidArgument("corruption: dropout probability outside [0,1]");
    if (confidence_noise < 0.0 || confidence_noise > 1.0)
        throw InvalidArgument("corruption: confidence noise outside [0,1]");
}

int apply_corruption(PoseSequence& poses, SilhouetteSequence& sils, const CorruptionSpec& spec, Rng& rng) {
    spec.validate();
    if (poses.size() != sils.size()) throw InvalidArgument("apply_corruption: sequence length mismatch");
    int events = 0;
    for (std::size_t t = 0; t < poses.size(); ++t) {
        Tensor& sil = sils[t];
        const int h = sil.dim(0), w = sil.dim(1);
        // Occluder coordinates live in silhouette pixel space; keypoints are
        // rescaled from the canonical frame before the inside test.
        const double sr = h / kBaseRows;
        const double sc = w / kBaseCols;
        for (const OcclusionRect& r : spec.occluders) {
            if (uniform_real(rng, 0.0, 1.0) >= r.probability) continue;
            ++events;
            const int i0 = std::max(0, r.row0), i1 = std::min(h, r.row0 + r.height);
            const int j0 = std::max(0, r.col0), j1 = std::min(w, r.col0 + r.width);
            for (int i = i0; i < i1; ++i)
                for (int j = j0; j < j1; ++j) sil.at(i, j) = 0.0;
            for (Joint& jt : poses[t].joints)
                if (inside_rect(jt.x * sr, jt.y * sc, r))
                    jt.confidence *= std::clamp(1.0 - spec.confidence_noise * uniform_real(rng, 0.0, 1.0), 0.0, 1.0);
        }
        if (spec.dropout_probability > 0.0 && uniform_real(rng, 0.0, 1.0) < spec.dropout_probability) {
            ++events;
            sil.fill(0.0);
        }
    }
    return events;
}

void write_pgm(const Tensor& image, const std::string& path) {
    if (image.rank() != 2) throw InvalidArgument("write_pgm: expected a rank-2 image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(image.dim(1)));
    for (int i = 0; i < image.dim(0); ++i) {
        for (int j = 0; j < image.dim(1); ++j) {
            double v = std::clamp(image.at(i, j), 0.0, 1.0);
            row[static_cast<std::size_t>(j)] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("short write to " + path);
}

Tensor read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    auto next_token = [&]() -> std::string {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {  // comment runs to end of line
                while (in.get(c) && c != '\n') {
                }
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(c);
        }
        if (tok.empty()) throw FormatError(path + ": truncated PGM header");
        return tok;
    };
    if (next_token() != "P5") throw FormatError(path + ": not a binary PGM (P5) file");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw FormatError(path + ": malformed PGM header");
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw FormatError(path + ": unsupported PGM dimensions or depth");
    Tensor image({h, w});
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int i = 0; i < h; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (in.gcount() != static_cast<std::streamsize>(row.size()))
            throw FormatError(path + ": truncated PGM pixel data");
        for (int j = 0; j < w; ++j) image.at(i, j) = row[static_cast<std::size_t>(j)] / static_cast<double>(maxval);
    }
    return image;
}

void DatasetBuildConfig::validate() const {
    if (identities < 1 || sequences_per_identity < 1 || frames < 1)
        throw InvalidArgument("dataset build: counts must be >= 1");
    if (height < 1 || width < 1) throw InvalidArgument("dataset build: dims must be >= 1");
    if (min_identity_gap < 0.0) throw InvalidArgument("dataset build: negative identity gap");
    corruption.validate();
}

std::string build_dataset(const DatasetBuildConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());

    SkeletonTopology topo = default_topology();
    write_topology(topo, (root / "topology.json").string());

    std::vector<IdentityParams> ids = generate_identities(cfg.seed, cfg.identities, cfg.min_identity_gap);

    json sequences = json::array();
    for (int i = 0; i < cfg.identities; ++i) {
        for (int s = 0; s < cfg.sequences_per_identity; ++s) {
            const std::string rel = seq_rel_dir(i, s);
            fs::path dir = root / rel;
            fs::create_directories(dir / "sil", ec);
            if (ec) throw IoError("cannot create " + (dir / "sil").string() + ": " + ec.message());

            // One stream per (seed, identity, sequence): phase first, then
            // corruption draws, so parallel builds replay identically.
            Rng rng(mix_seed(cfg.seed, 0x5e90u + static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(s)));
            double phase = uniform_real(rng, 0.0, 2.0 * kPi);
            PoseSequence poses = render_pose_sequence(ids[static_cast<std::size_t>(i)], cfg.frames, phase);
            SilhouetteSequence sils;
            sils.reserve(poses.size());
            for (const PoseFrame& f : poses)
                sils.push_back(rasterize_silhouette(f, ids[static_cast<std::size_t>(i)], cfg.height, cfg.width));
            int events = apply_corruption(poses, sils, cfg.corruption, rng);

            write_pose_jsonl(poses, (dir / "pose.jsonl").string());
            for (std::size_t t = 0; t < sils.size(); ++t) {
                char name[32];
                std::snprintf(name, sizeof(name), "%06d.pgm", static_cast<int>(t));
                write_pgm(sils[t], (dir / "sil" / name).string());
            }

            sequences.push_back({{"identity", i},
                                 {"sequence", s},
                                 {"pose", rel + "/pose.jsonl"},
                                 {"silhouette_dir", rel + "/sil"},
                                 {"frames", cfg.frames},
                                 {"corrupted", events > 0}});
        }
    }

    json manifest = {{"format", "gaitma-dataset"},
                     {"version", 1},
                     {"seed", cfg.seed},
                     {"identities", cfg.identities},
                     {"sequences_per_identity", cfg.sequences_per_identity},
                     {"frames", cfg.frames},
                     {"height", cfg.height},
                     {"width", cfg.width},
                     {"min_identity_gap", cfg.min_identity_gap},
                     {"corruption_enabled", !cfg.corruption.empty()},
                     {"sequences", sequences}};
    fs::path manifest_path = root / "manifest.json";
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    return manifest_path.string();
}

}  // namespace gaitma
