#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gaitma/checkpoint.hpp"
#include "gaitma/config.hpp"
#include "gaitma/dataset.hpp"
#include "gaitma/model.hpp"
#include "gaitma/random.hpp"

namespace gaitma {

/// One SGD update over every parameter:
///   g' = g + weight_decay * w;  v <- momentum * v + g';  w <- w - lr * v.
/// `velocity` must align with the store's registration order (initialize with
/// make_velocity). Non-finite gradients abort with the parameter's name.
void sgd_step(ParameterStore& store, double lr, double weight_decay, double momentum,
              std::vector<Tensor>& velocity);

std::vector<Tensor> make_velocity(const ParameterStore& store);

/// Schedule value at an iteration: lr * 0.1^(number of milestones <= iter).
double lr_at(std::int64_t iter, const TrainConfig& cfg);

/// Identity-balanced batch: P_b distinct identities, K_b sequences each,
/// drawn without replacement unless the identity has fewer than K_b. Returns
/// (sequence index, label) pairs grouped by identity in draw order; the
/// contiguous label blocks are what the per-identity loss statistics expect.
std::vector<std::pair<int, int>> sample_batch(const DatasetIndex& idx, int batch_identities, int batch_samples,
                                              Rng& rng);

struct TrainResult {
    std::string final_checkpoint;
    std::int64_t iterations = 0;
    double first_loss = 0.0;  // batch loss before any update
    double last_loss = 0.0;   // loss of the last batch before its update
    int degenerate_batches = 0;
};

/// Runs the training loop: writes `config.resolved`, appends one JSON line
/// per logged iteration to `metrics.jsonl`, saves `checkpoint_<iter>.gmck` at
/// each milestone and `checkpoint_final.gmck` at the end. Deterministic per
/// config seed. `resume_path` restores parameters, velocities, RNG stream and
/// iteration from a checkpoint whose config fingerprint must match.
TrainResult train(const RunConfig& cfg, const DatasetIndex& data, const std::string& out_dir,
                  const std::string& resume_path = "");

/// The model a run config describes, with num_classes resolved from the
/// dataset when the config leaves it at 0.
RunConfig resolve_config(RunConfig cfg, const DatasetIndex& data);

}  // namespace gaitma
