#include "gaitma/losses.hpp"

#include <cmath>

#include "gaitma/errors.hpp"

namespace gaitma {

void LossWeights::validate() const {
    if (alpha1 < 0.0 || alpha2 < 0.0 || alpha3 < 0.0)
        throw InvalidArgument("loss weights must be non-negative");
}

GaussianStats estimate_gaussian(const Tensor& features) {
    if (features.rank() != 2)
        throw InvalidArgument("estimate_gaussian: expected N×C, got " + dims_to_string(features.dims()));
    int n = features.dim(0), c = features.dim(1);
    if (n < 2) throw InvalidArgument("estimate_gaussian: need at least 2 samples");
    GaussianStats st{Tensor({c}), Tensor({c})};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) st.mu.at(j) += features.at(i, j);
    for (int j = 0; j < c; ++j) st.mu.at(j) /= n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            double d = features.at(i, j) - st.mu.at(j);
            st.sigma_diag.at(j) += d * d;
        }
    for (int j = 0; j < c; ++j) st.sigma_diag.at(j) /= n;
    return st;
}

double wasserstein_loss(const GaussianStats& a, const GaussianStats& b) {
    if (!a.mu.same_dims(b.mu) || !a.sigma_diag.same_dims(b.sigma_diag) || !a.mu.same_dims(a.sigma_diag))
        throw InvalidArgument("wasserstein_loss: statistics dims disagree");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.mu.size(); ++i) {
        if (a.sigma_diag[i] < 0.0 || b.sigma_diag[i] < 0.0)
            throw InvalidArgument("wasserstein_loss: negative variance");
        double dm = a.mu[i] - b.mu[i];
        double ds = std::sqrt(a.sigma_diag[i]) - std::sqrt(b.sigma_diag[i]);
        acc += dm * dm + ds * ds;
    }
    return acc;
}

Var wasserstein_between(Tape& tape, Var f1, Var f2) {
    (void)tape;
    const Tensor& a = f1.value();
    const Tensor& b = f2.value();
    if (a.rank() != 2 || !a.same_dims(b))
        throw InvalidArgument("wasserstein_between: inputs must be matching N×C matrices");
    Var dm = ops::sub(ops::column_mean(f1), ops::column_mean(f2));
    Var ds = ops::sub(ops::sqrt_elem(ops::column_var(f1)), ops::sqrt_elem(ops::column_var(f2)));
    return ops::add(ops::sum_all(ops::mul(dm, dm)), ops::sum_all(ops::mul(ds, ds)));
}

Var wasserstein_grouped(Tape& tape, Var f1, Var f2, const std::vector<int>& labels, bool per_identity) {
    if (!per_identity) return wasserstein_between(tape, f1, f2);
    const Tensor& a = f1.value();
    if (a.rank() != 2 || static_cast<int>(labels.size()) != a.dim(0))
        throw InvalidArgument("wasserstein_grouped: label count must match rows");
    Var total;
    int groups = 0;
    std::size_t start = 0;
    while (start < labels.size()) {
        std::size_t end = start;
        while (end < labels.size() && labels[end] == labels[start]) ++end;
        if (end - start < 2)
            throw InvalidArgument("wasserstein_grouped: identity group needs at least 2 samples");
        Var g1 = ops::slice(f1, 0, static_cast<int>(start), static_cast<int>(end - start));
        Var g2 = ops::slice(f2, 0, static_cast<int>(start), static_cast<int>(end - start));
        Var w = wasserstein_between(tape, g1, g2);
        total = groups == 0 ? w : ops::add(total, w);
        ++groups;
        start = end;
    }
    return ops::scale(total, 1.0 / groups);
}

Var joint_loss(Var l_tri, Var l_ce, Var l_w, const LossWeights& w) {
    w.validate();
    return ops::add(ops::scale(l_tri, w.alpha1), ops::add(ops::scale(l_ce, w.alpha2), ops::scale(l_w, w.alpha3)));
}

}  // namespace gaitma
