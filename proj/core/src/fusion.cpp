#include "gaitma/fusion.hpp"

#include <cmath>

#include "gaitma/errors.hpp"

namespace gaitma {

void register_cam_params(ParameterStore& store, const std::string& prefix, int c, int reduction, Rng& rng) {
    int c2 = 2 * c;
    if (reduction <= 0 || c2 % reduction != 0)
        throw InvalidArgument("cam: reduction ratio " + std::to_string(reduction) + " must divide " +
                              std::to_string(c2));
    int mid = c2 / reduction;
    store.add(prefix + ".w1", uniform_fan_in({c2, mid}, c2, rng));
    store.add(prefix + ".b1", Tensor({mid}));
    store.add(prefix + ".w2", uniform_fan_in({mid, c2}, mid, rng));
    store.add(prefix + ".b2", Tensor({c2}));
}

Var cam_forward(Tape& tape, ParameterStore& store, const std::string& prefix, Var y_sil, Var y_ske) {
    const Tensor& a = y_sil.value();
    const Tensor& b = y_ske.value();
    if (a.rank() != 2 || !a.same_dims(b))
        throw InvalidArgument("cam_forward: inputs must be matching P×C matrices, got " + dims_to_string(a.dims()) +
                              " vs " + dims_to_string(b.dims()));
    Var y_m = ops::concat({y_sil, y_ske}, 1);
    Var h = ops::relu(ops::linear(y_m, tape.param(store.get(prefix + ".w1")), tape.param(store.get(prefix + ".b1"))));
    Var y_score =
        ops::sigmoid(ops::linear(h, tape.param(store.get(prefix + ".w2")), tape.param(store.get(prefix + ".b2"))));
    return ops::add(ops::mul(y_score, y_m), y_m);
}

void register_mlm_params(ParameterStore& store, const std::string& prefix, int c, Rng& rng) {
    (void)rng;  // layer-norm affine starts at identity; nothing is drawn
    store.add(prefix + ".ln1.gain", Tensor::full({c}, 1.0));
    store.add(prefix + ".ln1.shift", Tensor({c}));
    store.add(prefix + ".ln2.gain", Tensor::full({c}, 1.0));
    store.add(prefix + ".ln2.shift", Tensor({c}));
}

namespace {

Var mlm_direction(Tape& tape, ParameterStore& store, const std::string& ln_name, Var q, Var v, double d) {
    Var attn = ops::softmax_rows(ops::scale(ops::matmul(q, v, /*transpose_b=*/true), 1.0 / std::sqrt(d)));
    Var mixed = ops::add(ops::matmul(attn, v), q);
    return ops::layer_norm(mixed, tape.param(store.get(ln_name + ".gain")), tape.param(store.get(ln_name + ".shift")));
}

}  // namespace

MlmOut mlm_forward(Tape& tape, ParameterStore& store, const std::string& prefix, Var y1, Var y2, double d) {
    const Tensor& a = y1.value();
    const Tensor& b = y2.value();
    if (a.rank() != 2 || !a.same_dims(b))
        throw InvalidArgument("mlm_forward: inputs must be matching P×C matrices, got " + dims_to_string(a.dims()) +
                              " vs " + dims_to_string(b.dims()));
    if (d == 0.0) d = a.dim(1);
    if (d <= 0.0) throw InvalidArgument("mlm_forward: scale factor must be positive");
    MlmOut out;
    out.y1 = mlm_direction(tape, store, prefix + ".ln1", y1, y2, d);
    out.y2 = mlm_direction(tape, store, prefix + ".ln2", y2, y1, d);
    return out;
}

Var fuse_output(Var y1, Var y2) { return ops::concat({y1, y2}, 1); }

}  // namespace gaitma
