// Command-line front end for the gait recognition pipeline: synthetic data
// generation, heatmap rendering, training, retrieval evaluation and the
// finite-difference gradient audit.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gaitma/checkpoint.hpp"
#include "gaitma/config.hpp"
#include "gaitma/dataset.hpp"
#include "gaitma/errors.hpp"
#include "gaitma/eval.hpp"
#include "gaitma/gradsuite.hpp"
#include "gaitma/heatmap.hpp"
#include "gaitma/pose_io.hpp"
#include "gaitma/synthgait.hpp"
#include "gaitma/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes shared by every subcommand. Usage problems (bad flags, violated
// preconditions) return 2, filesystem failures 3, malformed data files 4 and
// violated numeric contracts 5.
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;
constexpr int kExitContract = 5;

gaitma::CorruptionSpec read_corruption_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw gaitma::IoError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw gaitma::FormatError(path + ": " + e.what());
    }
    gaitma::CorruptionSpec spec;
    try {
        if (doc.contains("dropout_probability")) spec.dropout_probability = doc["dropout_probability"].get<double>();
        if (doc.contains("confidence_noise")) spec.confidence_noise = doc["confidence_noise"].get<double>();
        for (const auto& r : doc.value("occluders", json::array())) {
            gaitma::OcclusionRect rect;
            rect.row0 = r.at("row0").get<int>();
            rect.col0 = r.at("col0").get<int>();
            rect.height = r.at("height").get<int>();
            rect.width = r.at("width").get<int>();
            rect.probability = r.at("probability").get<double>();
            spec.occluders.push_back(rect);
        }
    } catch (const json::exception& e) {
        throw gaitma::FormatError(path + ": " + e.what());
    }
    spec.validate();
    return spec;
}

struct GenDataArgs {
    std::string out;
    int identities = 8;
    int seqs = 4;
    int frames = 24;
    int height = 64;
    int width = 44;
    double gap = 1.5;
    std::uint64_t seed = 0;
    std::string corrupt_path;
};

int cmd_gen_data(const GenDataArgs& a) {
    gaitma::DatasetBuildConfig cfg;
    cfg.identities = a.identities;
    cfg.sequences_per_identity = a.seqs;
    cfg.frames = a.frames;
    cfg.height = a.height;
    cfg.width = a.width;
    cfg.min_identity_gap = a.gap;
    cfg.seed = a.seed;
    if (!a.corrupt_path.empty()) cfg.corruption = read_corruption_spec(a.corrupt_path);
    cfg.validate();
    std::string manifest = gaitma::build_dataset(cfg, a.out);
    std::cout << manifest << "\n";
    return 0;
}

struct HeatmapArgs {
    std::string poses;
    std::string topology;
    std::string out;
    std::string size = "64x44";
    double sigma = 2.0;
    bool verify_oracle = false;
};

std::pair<int, int> parse_size(const std::string& text) {
    int h = 0, w = 0;
    char sep = 0;
    if (std::sscanf(text.c_str(), "%d%c%d", &h, &sep, &w) != 3 || (sep != 'x' && sep != 'X') || h < 1 || w < 1)
        throw gaitma::InvalidArgument("--size expects HxW with positive extents, got '" + text + "'");
    return {h, w};
}

int cmd_heatmap(const HeatmapArgs& a) {
    if (a.sigma <= 0.0) throw gaitma::InvalidArgument("--sigma must be positive");
    auto [h, w] = parse_size(a.size);
    gaitma::PoseSequence seq = gaitma::read_pose_jsonl(a.poses);
    gaitma::SkeletonTopology topo =
        a.topology.empty() ? gaitma::default_topology() : gaitma::read_topology(a.topology);
    gaitma::HeatmapVolume vol = gaitma::stack_sequence(seq, topo, a.sigma, h, w);
    if (a.verify_oracle) {
        gaitma::HeatmapVolume ref = gaitma::reference_stack_sequence(seq, topo, a.sigma, h, w);
        double max_diff = 0.0;
        for (std::int64_t i = 0; i < vol.values.size(); ++i)
            max_diff = std::max(max_diff, std::abs(vol.values[i] - ref.values[i]));
        if (max_diff > 1e-12)
            throw gaitma::ContractError("heatmap oracle mismatch: max abs diff " + std::to_string(max_diff));
        std::cout << "oracle match, max abs diff " << max_diff << "\n";
    }
    gaitma::write_heatmap_bin(vol, a.out);
    std::cout << "frames=" << vol.frames() << " channels=" << vol.channels() << " height=" << vol.height()
              << " width=" << vol.width() << "\n";
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string resume;
    std::vector<std::string> overrides;
};

gaitma::RunConfig load_config_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
    gaitma::RunConfig cfg = gaitma::load_run_config(path);
    for (const std::string& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw gaitma::InvalidArgument("--set expects key=value, got '" + kv + "'");
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

int cmd_train(const TrainArgs& a) {
    gaitma::RunConfig cfg = load_config_with_overrides(a.config, a.overrides);
    gaitma::DatasetIndex data = gaitma::load_dataset(a.data);
    gaitma::TrainResult result = gaitma::train(cfg, data, a.out, a.resume);
    std::cout << "iterations=" << result.iterations << " first_loss=" << result.first_loss
              << " last_loss=" << result.last_loss << "\n"
              << result.final_checkpoint << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string report;
    std::string embeddings;
    std::string config;
};

int cmd_eval(const EvalArgs& a) {
    std::string config_path = a.config;
    if (config_path.empty()) {
        config_path = (fs::path(a.checkpoint).parent_path() / "config.resolved").string();
        if (!fs::exists(config_path))
            throw gaitma::InvalidArgument("no config.resolved next to the checkpoint; pass --config");
    }
    gaitma::RunConfig cfg = gaitma::load_run_config(config_path);
    cfg.validate();
    if (cfg.model.num_classes == 0)
        throw gaitma::InvalidArgument("config " + config_path + " has model.num_classes=0; evaluation needs the " +
                                      "resolved training config");

    gaitma::Checkpoint ckpt = gaitma::load_checkpoint(a.checkpoint);
    if (ckpt.config_fingerprint != cfg.fingerprint())
        throw gaitma::ContractError("checkpoint was produced by a different configuration (fingerprint mismatch)");

    gaitma::DatasetIndex data = gaitma::load_dataset(a.data);
    gaitma::GaitMAModel model(cfg.model, cfg.train.seed);
    gaitma::load_parameters(ckpt, model.params());

    gaitma::EvalSplit split = gaitma::first_sequence_split(data);
    std::vector<gaitma::EmbeddingRecord> gallery = gaitma::embed_sequences(model, cfg, data, split.gallery);
    std::vector<gaitma::EmbeddingRecord> probes = gaitma::embed_sequences(model, cfg, data, split.probes);
    gaitma::EvalReport report = gaitma::evaluate_embeddings(gallery, probes);

    std::ofstream out(a.report, std::ios::binary | std::ios::trunc);
    if (!out) throw gaitma::IoError("cannot open " + a.report + " for writing");
    out << gaitma::report_to_json(report) << "\n";
    if (!out) throw gaitma::IoError("short write to " + a.report);

    if (!a.embeddings.empty()) {
        std::vector<gaitma::EmbeddingRecord> all = gallery;
        all.insert(all.end(), probes.begin(), probes.end());
        gaitma::write_embeddings_jsonl(all, a.embeddings);
    }
    if (report.zero_match_excluded > 0)
        std::cerr << "warning: " << report.zero_match_excluded
                  << " probes had no gallery match and were excluded from mAP/mINP\n";
    std::cout << "rank1=" << report.rank1 << " rank5=" << report.rank5 << " mAP=" << report.map
              << " mINP=" << report.minp << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    auto entries = gaitma::run_gradient_suite(seed);
    for (const auto& e : entries) {
        std::printf("%-26s %s  checked=%d skipped=%d failed=%d max_rel_err=%.3e (%.2fs)\n", e.name.c_str(),
                    e.result.ok() ? "ok" : "FAIL", e.result.checked, e.result.skipped, e.result.failed,
                    e.result.max_rel_err, e.seconds);
        if (!e.result.first_failure.empty()) std::printf("    %s\n", e.result.first_failure.c_str());
    }
    if (!gaitma::suite_passed(entries)) throw gaitma::ContractError("gradient suite failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gait recognition from silhouettes and skeleton heatmaps"};
    app.require_subcommand(1);

    GenDataArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic walking dataset");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--identities", gen.identities, "number of identities");
    gen_cmd->add_option("--seqs", gen.seqs, "sequences per identity");
    gen_cmd->add_option("--frames", gen.frames, "frames per sequence");
    gen_cmd->add_option("--height", gen.height, "silhouette height in pixels");
    gen_cmd->add_option("--width", gen.width, "silhouette width in pixels");
    gen_cmd->add_option("--gap", gen.gap, "minimum limb-length gap between identities, pixels");
    gen_cmd->add_option("--seed", gen.seed, "dataset seed");
    gen_cmd->add_option("--corrupt", gen.corrupt_path, "JSON corruption spec (occluders, dropout, noise)");

    HeatmapArgs hm;
    CLI::App* hm_cmd = app.add_subcommand("heatmap", "render joint/limb heatmaps for a pose file");
    hm_cmd->add_option("--poses", hm.poses, "pose JSONL file")->required();
    hm_cmd->add_option("--topology", hm.topology, "topology JSON (default: built-in 17-joint/12-limb layout)");
    hm_cmd->add_option("--out", hm.out, "output heatmap volume file")->required();
    hm_cmd->add_option("--size", hm.size, "heatmap resolution HxW (default 64x44)");
    hm_cmd->add_option("--sigma", hm.sigma, "Gaussian spread in pixels (default 2)");
    hm_cmd->add_flag("--verify-oracle", hm.verify_oracle, "compare against the per-pixel reference within 1e-12");

    TrainArgs tr;
    CLI::App* tr_cmd = app.add_subcommand("train", "train a model on a generated dataset");
    tr_cmd->add_option("--config", tr.config, "run config file")->required();
    tr_cmd->add_option("--data", tr.data, "dataset manifest.json")->required();
    tr_cmd->add_option("--out", tr.out, "output directory for checkpoints and logs")->required();
    tr_cmd->add_option("--resume", tr.resume, "checkpoint to resume from");
    tr_cmd->add_option("--set", tr.overrides, "config override key=value (repeatable)");

    EvalArgs ev;
    CLI::App* ev_cmd = app.add_subcommand("eval", "retrieval metrics for a trained checkpoint");
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "trained checkpoint file")->required();
    ev_cmd->add_option("--data", ev.data, "dataset manifest.json")->required();
    ev_cmd->add_option("--report", ev.report, "output JSON report path")->required();
    ev_cmd->add_option("--embeddings", ev.embeddings, "optional embedding dump (JSONL)");
    ev_cmd->add_option("--config", ev.config, "run config (default: config.resolved next to the checkpoint)");

    std::uint64_t gc_seed = 0;
    bool fp64 = false;
    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference audit of every op and the full model");
    gc_cmd->add_option("--seed", gc_seed, "probe seed");
    gc_cmd->add_flag("--fp64", fp64, "require 64-bit arithmetic (always on; flag documents the contract)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen_data(gen);
        if (hm_cmd->parsed()) return cmd_heatmap(hm);
        if (tr_cmd->parsed()) return cmd_train(tr);
        if (ev_cmd->parsed()) return cmd_eval(ev);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc_seed);
    } catch (const gaitma::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const gaitma::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const gaitma::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const gaitma::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
