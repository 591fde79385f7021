#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>
#include <unistd.h>
#include <vector>

#include "gaitma/random.hpp"
#include "gaitma/tensor.hpp"

namespace testutil {

inline gaitma::Tensor rand_tensor(std::vector<int> dims, gaitma::Rng& rng, double lo = -1.0, double hi = 1.0) {
    gaitma::Tensor t(std::move(dims));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = gaitma::uniform_real(rng, lo, hi);
    return t;
}

inline double max_diff(const gaitma::Tensor& a, const gaitma::Tensor& b) {
    if (!a.same_dims(b)) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("gaitma_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
