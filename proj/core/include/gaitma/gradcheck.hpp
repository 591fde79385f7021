#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gaitma/tape.hpp"

namespace gaitma {

struct GradCheckConfig {
    double step = 1e-5;
    double rel_tol = 1e-4;
    /// Absolute criterion, applied where the analytic value is below abs_floor.
    double abs_tol = 1e-7;
    double abs_floor = 1e-6;
    /// A probe is skipped when a recorded curvature-singularity input (sqrt
    /// argument, pairwise distance) shifts between the two displaced passes by
    /// more than this fraction of its base value; finite differences degrade
    /// exactly when the perturbation is large relative to the distance from
    /// the singularity.
    double curvature_rel_shift = 0.02;
    /// 0 = probe every element; otherwise walk a shuffled element order until
    /// this many probes have actually been checked (skips do not count).
    int probes = 0;
    std::uint64_t seed = 0x67c0ffeeULL;
};

struct GradCheckResult {
    int checked = 0;
    int skipped = 0;
    int failed = 0;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string first_failure;

    bool ok() const { return failed == 0 && checked > 0; }
};

/// Builds a scalar objective from leaf Vars created over the given input
/// tensors (same order). Must be deterministic: it is re-invoked for every
/// finite-difference evaluation.
using BuildWithInputs = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares analytic d(objective)/d(input element) against central finite
/// differences. A probe is skipped when a perturbed forward pass crosses a
/// discrete-choice boundary (activation signature changes) or comes too close
/// to a curvature singularity.
GradCheckResult check_gradients(const BuildWithInputs& build, const std::vector<Tensor>& inputs,
                                const GradCheckConfig& cfg = {});

/// Builds a scalar objective whose leaves are parameters of an external
/// store (created via Tape::param inside the callable).
using BuildWithParams = std::function<Var(Tape&)>;

/// Same check, probing randomly chosen elements across every parameter in
/// the store. Parameter values are restored after probing.
GradCheckResult check_param_gradients(const BuildWithParams& build, ParameterStore& store,
                                      const GradCheckConfig& cfg = {});

}  // namespace gaitma
