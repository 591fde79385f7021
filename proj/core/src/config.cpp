#include "gaitma/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gaitma/errors.hpp"

namespace gaitma {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_int_list(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::string format_int64_list(const std::vector<std::int64_t>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw FormatError("config: cannot parse value '" + value + "' for key '" + key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    double out;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
    return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t out;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    std::uint64_t out;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    bad_value(key, value);
}

template <typename Int>
std::vector<Int> parse_list(const std::string& key, const std::string& value) {
    std::vector<Int> out;
    if (value.empty()) return out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        std::size_t comma = value.find(',', pos);
        std::string item = value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        out.push_back(static_cast<Int>(parse_int(key, item)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("train config: lr must be positive");
    if (weight_decay < 0.0 || momentum < 0.0 || momentum >= 1.0)
        throw InvalidArgument("train config: weight decay must be >= 0 and momentum in [0,1)");
    for (std::size_t i = 1; i < milestones.size(); ++i)
        if (milestones[i] <= milestones[i - 1])
            throw InvalidArgument("train config: milestones must be strictly increasing");
    if (!milestones.empty() && milestones.front() < 0) throw InvalidArgument("train config: negative milestone");
    if (total_iters < 0) throw InvalidArgument("train config: negative iteration count");
    if (batch_identities < 2 || batch_samples < 2)
        throw InvalidArgument("train config: batch needs at least 2 identities and 2 samples each");
    if (frames_per_clip < 1) throw InvalidArgument("train config: clip length must be >= 1");
    if (log_every < 1) throw InvalidArgument("train config: log interval must be >= 1");
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "model.sil_stages") model.backbone.sil_stages = parse_list<int>(key, value);
    else if (key == "model.ske_stages") model.backbone.ske_stages = parse_list<int>(key, value);
    else if (key == "model.parts") model.backbone.part_count = static_cast<int>(parse_int(key, value));
    else if (key == "model.embed_dim") model.backbone.embed_dim = static_cast<int>(parse_int(key, value));
    else if (key == "model.sil_height") model.backbone.sil_height = static_cast<int>(parse_int(key, value));
    else if (key == "model.sil_width") model.backbone.sil_width = static_cast<int>(parse_int(key, value));
    else if (key == "model.ske_height") model.backbone.ske_height = static_cast<int>(parse_int(key, value));
    else if (key == "model.ske_width") model.backbone.ske_width = static_cast<int>(parse_int(key, value));
    else if (key == "model.skeleton_branch") model.skeleton_branch = parse_bool(key, value);
    else if (key == "model.skeleton_channels") model.skeleton_channels = static_cast<int>(parse_int(key, value));
    else if (key == "model.cam_reduction") model.cam_reduction = static_cast<int>(parse_int(key, value));
    else if (key == "model.mlm_scale") model.mlm_scale = parse_double(key, value);
    else if (key == "model.num_classes") model.num_classes = static_cast<int>(parse_int(key, value));
    else if (key == "fusion.cam") model.cam = parse_bool(key, value);
    else if (key == "fusion.mlm") model.mlm = parse_bool(key, value);
    else if (key == "heatmap.sigma") heatmap_sigma = parse_double(key, value);
    else if (key == "loss.alpha1") loss_weights.alpha1 = parse_double(key, value);
    else if (key == "loss.alpha2") loss_weights.alpha2 = parse_double(key, value);
    else if (key == "loss.alpha3") loss_weights.alpha3 = parse_double(key, value);
    else if (key == "loss.margin") triplet_margin = parse_double(key, value);
    else if (key == "loss.wasserstein") wasserstein = parse_bool(key, value);
    else if (key == "loss.wasserstein_per_identity") wasserstein_per_identity = parse_bool(key, value);
    else if (key == "train.lr") train.lr = parse_double(key, value);
    else if (key == "train.weight_decay") train.weight_decay = parse_double(key, value);
    else if (key == "train.momentum") train.momentum = parse_double(key, value);
    else if (key == "train.milestones") train.milestones = parse_list<std::int64_t>(key, value);
    else if (key == "train.total_iters") train.total_iters = parse_int(key, value);
    else if (key == "train.batch_identities") train.batch_identities = static_cast<int>(parse_int(key, value));
    else if (key == "train.batch_samples") train.batch_samples = static_cast<int>(parse_int(key, value));
    else if (key == "train.frames_per_clip") train.frames_per_clip = static_cast<int>(parse_int(key, value));
    else if (key == "train.seed") train.seed = parse_uint(key, value);
    else if (key == "train.log_every") train.log_every = static_cast<int>(parse_int(key, value));
    else throw FormatError("config: unknown key '" + key + "'");
}

void RunConfig::validate() const {
    model.validate();
    if (!(heatmap_sigma > 0.0)) throw InvalidArgument("config: heatmap.sigma must be positive");
    loss_weights.validate();
    if (triplet_margin < 0.0) throw InvalidArgument("config: negative triplet margin");
    train.validate();
}

std::string RunConfig::canonical() const {
    std::ostringstream os;
    os << "model.sil_stages=" << format_int_list(model.backbone.sil_stages) << "\n";
    os << "model.ske_stages=" << format_int_list(model.backbone.ske_stages) << "\n";
    os << "model.parts=" << model.backbone.part_count << "\n";
    os << "model.embed_dim=" << model.backbone.embed_dim << "\n";
    os << "model.sil_height=" << model.backbone.sil_height << "\n";
    os << "model.sil_width=" << model.backbone.sil_width << "\n";
    os << "model.ske_height=" << model.backbone.ske_height << "\n";
    os << "model.ske_width=" << model.backbone.ske_width << "\n";
    os << "model.skeleton_branch=" << (model.skeleton_branch ? "on" : "off") << "\n";
    os << "model.skeleton_channels=" << model.skeleton_channels << "\n";
    os << "model.cam_reduction=" << model.cam_reduction << "\n";
    os << "model.mlm_scale=" << format_double(model.mlm_scale) << "\n";
    os << "model.num_classes=" << model.num_classes << "\n";
    os << "fusion.cam=" << (model.cam ? "on" : "off") << "\n";
    os << "fusion.mlm=" << (model.mlm ? "on" : "off") << "\n";
    os << "heatmap.sigma=" << format_double(heatmap_sigma) << "\n";
    os << "loss.alpha1=" << format_double(loss_weights.alpha1) << "\n";
    os << "loss.alpha2=" << format_double(loss_weights.alpha2) << "\n";
    os << "loss.alpha3=" << format_double(loss_weights.alpha3) << "\n";
    os << "loss.margin=" << format_double(triplet_margin) << "\n";
    os << "loss.wasserstein=" << (wasserstein ? "on" : "off") << "\n";
    os << "loss.wasserstein_per_identity=" << (wasserstein_per_identity ? "on" : "off") << "\n";
    os << "train.lr=" << format_double(train.lr) << "\n";
    os << "train.weight_decay=" << format_double(train.weight_decay) << "\n";
    os << "train.momentum=" << format_double(train.momentum) << "\n";
    os << "train.milestones=" << format_int64_list(train.milestones) << "\n";
    os << "train.total_iters=" << train.total_iters << "\n";
    os << "train.batch_identities=" << train.batch_identities << "\n";
    os << "train.batch_samples=" << train.batch_samples << "\n";
    os << "train.frames_per_clip=" << train.frames_per_clip << "\n";
    os << "train.seed=" << train.seed << "\n";
    os << "train.log_every=" << train.log_every << "\n";
    return os.str();
}

std::uint64_t RunConfig::fingerprint() const {
    std::string text = canonical();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RunConfig parse_run_config(const std::string& text, const std::string& context) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw FormatError(context + ":" + std::to_string(lineno) + ": expected key=value");
        cfg.apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path);
}

}  // namespace gaitma
