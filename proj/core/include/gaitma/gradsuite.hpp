#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gaitma/gradcheck.hpp"

namespace gaitma {

struct SuiteEntry {
    std::string name;
    GradCheckResult result;
    double seconds = 0.0;
};

/// Finite-difference verification of every differentiable primitive, the
/// fusion compositions, both encoder branches and the fully composed model
/// with the joint training objective. Inputs are deterministic per seed; the
/// composed-model entry probes a random subset of parameters, everything
/// else probes exhaustively.
std::vector<SuiteEntry> run_gradient_suite(std::uint64_t seed);

bool suite_passed(const std::vector<SuiteEntry>& entries);

}  // namespace gaitma
