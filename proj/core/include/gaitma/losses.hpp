#pragma once

#include <vector>

#include "gaitma/ops.hpp"
#include "gaitma/tape.hpp"
#include "gaitma/tensor.hpp"

namespace gaitma {

/// Weights of the joint objective: alpha1 scales the triplet term, alpha2
/// cross-entropy, alpha3 the distribution-alignment term.
struct LossWeights {
    double alpha1 = 1.0;
    double alpha2 = 0.1;
    double alpha3 = 0.1;

    void validate() const;
};

/// Diagonal Gaussian summary of a feature batch.
struct GaussianStats {
    Tensor mu;          ///< per-dimension mean, length C
    Tensor sigma_diag;  ///< per-dimension population variance, length C
};

/// Sample mean and population variance (N divisor) of an N×C batch; N >= 2.
GaussianStats estimate_gaussian(const Tensor& features);

/// Squared 2-Wasserstein distance between diagonal Gaussians:
/// ‖μ−μ*‖² + ‖√Σ − √Σ*‖², exact arithmetic on the given statistics.
double wasserstein_loss(const GaussianStats& a, const GaussianStats& b);

/// Differentiable counterpart: estimates both batches' statistics on the
/// tape and returns the distance as a scalar Var. f1, f2: N×C.
Var wasserstein_between(Tape& tape, Var f1, Var f2);

/// Per-identity variant: rows must be grouped contiguously by label; the
/// distance is computed per identity group and averaged. With per_identity
/// false this reduces to wasserstein_between over the whole batch.
Var wasserstein_grouped(Tape& tape, Var f1, Var f2, const std::vector<int>& labels, bool per_identity);

/// alpha1·L_tri + alpha2·L_ce + alpha3·L_w.
Var joint_loss(Var l_tri, Var l_ce, Var l_w, const LossWeights& w);

}  // namespace gaitma
