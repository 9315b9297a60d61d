#pragma once

#include <cstdint>

#include "sploc/nn/param_store.hpp"

namespace sploc::nn {

struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  long iterations = 0;

  void validate() const;
};

/// Decoupled-weight-decay Adam:
///   θ ← θ(1 - lr·wd);  θ ← θ - lr · m̂ / (sqrt(v̂) + ε)
/// Skips non-trainable parameters, zeroes gradients afterwards, and throws
/// TrainingError naming the parameter if any gradient is non-finite.
void adamw_step(ParamStore& store, const TrainConfig& cfg);

/// θ ← θ - lr · (2·l2·θ + g): gradient descent on g's objective plus l2·Σθ².
void sgd_l2_step(ParamStore& store, double learning_rate, double l2);

}  // namespace sploc::nn
