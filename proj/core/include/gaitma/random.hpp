#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gaitma {

/// splitmix64 step; the standard 64-bit finalizer used to spawn independent
/// seed streams from a base seed plus stream indices.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic sub-seed for stream (a, b) of a base seed. Sequence builds
/// derive one stream per (identity, sequence) so serial and parallel
/// generation produce identical bytes.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = base;
    (void)splitmix64(s);
    s ^= 0x632BE59BD9B4E019ull * (a + 1);
    (void)splitmix64(s);
    s ^= 0x9E3779B97F4A7C15ull * (b + 1);
    return splitmix64(s);
}

using Rng = std::mt19937_64;

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
    return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

/// Serialize the full mt19937_64 state as text (space-separated words).
std::string save_rng_state(const Rng& rng);
void load_rng_state(Rng& rng, const std::string& blob);

class Tensor;

/// Weight initialization: U(−1/√fan_in, +1/√fan_in) elementwise.
Tensor uniform_fan_in(const std::vector<int>& dims, int fan_in, Rng& rng);

}  // namespace gaitma
