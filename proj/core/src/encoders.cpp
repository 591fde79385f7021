#include "gaitma/encoders.hpp"

#include "gaitma/errors.hpp"

namespace gaitma {

void BackboneConfig::validate() const {
    if (sil_stages.empty() || ske_stages.empty()) throw InvalidArgument("backbone: stage lists must be non-empty");
    for (int w : sil_stages)
        if (w <= 0) throw InvalidArgument("backbone: silhouette stage widths must be positive");
    for (int w : ske_stages)
        if (w <= 0) throw InvalidArgument("backbone: skeleton stage widths must be positive");
    if (part_count <= 0 || embed_dim <= 0) throw InvalidArgument("backbone: part_count and embed_dim must be positive");
    if (sil_height <= 0 || sil_width <= 0 || ske_height <= 0 || ske_width <= 0)
        throw InvalidArgument("backbone: resolutions must be positive");
    int hs = pooled_extent(sil_height, static_cast<int>(sil_stages.size()));
    int hk = pooled_extent(ske_height, static_cast<int>(ske_stages.size()));
    if (hs == 0 || hk == 0) throw InvalidArgument("backbone: feature height pools away to zero");
    if (hs % part_count != 0 || hk % part_count != 0)
        throw InvalidArgument("backbone: part_count " + std::to_string(part_count) +
                              " must divide the post-backbone heights (" + std::to_string(hs) + ", " +
                              std::to_string(hk) + ")");
}

int pooled_extent(int extent, int stages) {
    for (int s = 0; s < stages; ++s) extent /= 2;
    return extent;
}

namespace {

std::string stage_prefix(const std::string& prefix, int s) { return prefix + ".stage" + std::to_string(s); }

Tensor conv_init(bool temporal, int co, int ci, int k, Rng& rng) {
    int kt = temporal ? k : 1;
    int fan_in = ci * kt * k * k;
    if (temporal) return uniform_fan_in({co, ci, kt, k, k}, fan_in, rng);
    return uniform_fan_in({co, ci, k, k}, fan_in, rng);
}

Var stage_conv(Tape& tape, ParameterStore& store, const std::string& name, bool temporal, Var x, int pad) {
    Var w = tape.param(store.get(name + ".weight"));
    Parameter* b = store.find(name + ".bias");
    if (temporal) {
        if (b != nullptr) return ops::conv3d(x, w, tape.param(*b), 1, 1, pad, pad);
        return ops::conv3d(x, w, 1, 1, pad, pad);
    }
    if (b != nullptr) return ops::conv2d_seq(x, w, tape.param(*b), 1, pad);
    return ops::conv2d_seq(x, w, 1, pad);
}

}  // namespace

void register_branch_params(ParameterStore& store, const std::string& prefix, bool temporal, int in_channels,
                            const std::vector<int>& stages, Rng& rng) {
    int ci = in_channels;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        int co = stages[s];
        std::string sp = stage_prefix(prefix, static_cast<int>(s));
        store.add(sp + ".conv1.weight", conv_init(temporal, co, ci, 3, rng));
        store.add(sp + ".conv1.bias", Tensor({co}));
        store.add(sp + ".conv2.weight", conv_init(temporal, co, co, 3, rng));
        store.add(sp + ".conv2.bias", Tensor({co}));
        if (ci != co) store.add(sp + ".skip.weight", conv_init(temporal, co, ci, 1, rng));
        ci = co;
    }
}

Var encode_branch(Tape& tape, ParameterStore& store, const std::string& prefix, bool temporal, Var x,
                  const std::vector<int>& stages) {
    for (std::size_t s = 0; s < stages.size(); ++s) {
        std::string sp = stage_prefix(prefix, static_cast<int>(s));
        Var c1 = ops::relu(stage_conv(tape, store, sp + ".conv1", temporal, x, 1));
        Var c2 = stage_conv(tape, store, sp + ".conv2", temporal, c1, 1);
        Var sk = store.find(sp + ".skip.weight") != nullptr ? stage_conv(tape, store, sp + ".skip", temporal, x, 0)
                                                           : x;
        x = ops::pool(ops::relu(ops::add(c2, sk)), ops::PoolKind::kMax, {2, 3}, 2);
    }
    return x;
}

Var horizontal_mapping(Var fmap, int parts) {
    const Tensor& fv = fmap.value();
    if (fv.rank() != 4)
        throw InvalidArgument("horizontal_mapping: expected C×T×H×W, got " + dims_to_string(fv.dims()));
    int c = fv.dim(0), t = fv.dim(1), h = fv.dim(2), w = fv.dim(3);
    if (parts <= 0 || parts > h)
        throw InvalidArgument("horizontal_mapping: parts " + std::to_string(parts) + " exceeds height " +
                              std::to_string(h));
    int base = h / parts, rem = h % parts;
    std::vector<Var> rows;
    int off = 0;
    for (int s = 0; s < parts; ++s) {
        int len = base + (s < rem ? 1 : 0);
        Var strip = ops::slice(fmap, 2, off, len);
        Var mx = ops::pool(ops::pool(strip, ops::PoolKind::kMax, {2}, len), ops::PoolKind::kMax, {3}, w);
        Var av = ops::pool(ops::pool(strip, ops::PoolKind::kMean, {2}, len), ops::PoolKind::kMean, {3}, w);
        Var v = ops::transpose(ops::reshape(ops::add(mx, av), {c, t}));  // T×C
        rows.push_back(ops::reshape(v, {t, 1, c}));
        off += len;
    }
    return ops::concat(rows, 1);
}

Var temporal_aggregate(Var x) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw InvalidArgument("temporal_aggregate: expected T×P×C, got " + dims_to_string(xv.dims()));
    int t = xv.dim(0);
    return ops::reshape(ops::pool(x, ops::PoolKind::kMax, {0}, t), {xv.dim(1), xv.dim(2)});
}

void register_part_projection(ParameterStore& store, const std::string& name, int parts, int cin, int cout, Rng& rng) {
    store.add(name + ".weight", uniform_fan_in({parts, cin, cout}, cin, rng));
}

Var part_projection(Tape& tape, ParameterStore& store, const std::string& name, Var x) {
    return ops::part_linear(x, tape.param(store.get(name + ".weight")));
}

}  // namespace gaitma
