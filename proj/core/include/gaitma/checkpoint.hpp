#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gaitma/tensor.hpp"

namespace gaitma {

/// Serialized training state. Entries are the model parameters in
/// registration order followed by the optimizer velocities under the
/// "momentum/" name prefix.
struct Checkpoint {
    std::uint64_t iteration = 0;
    std::uint64_t config_fingerprint = 0;
    std::vector<std::pair<std::string, Tensor>> entries;
    std::string rng_state;  // serialized engine stream

    const Tensor* find(const std::string& name) const;
};

/// File layout, all little-endian: magic "GMCK", u32 version (1),
/// u64 iteration, u64 config fingerprint, u32 entry count, then per entry
/// u32 name length + name bytes + u32 rank + u32 dims[rank] + f64 values,
/// then u32 RNG blob length + blob bytes.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

class ParameterStore;

/// Copies the checkpoint's parameter values (not the optimizer state) into a
/// store whose names and shapes must all be present.
void load_parameters(const Checkpoint& ckpt, ParameterStore& store);

}  // namespace gaitma
