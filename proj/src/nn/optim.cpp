#include "sploc/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sploc/common.hpp"

namespace sploc::nn {

namespace {
void check_finite(const ParamStore& store) {
  for (const auto& p : store.params()) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        throw TrainingError("non-finite gradient in " + p.name + "[" + std::to_string(i) + "] at step " +
                            std::to_string(store.step));
      }
    }
  }
}
}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ValidationError("betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
}

void adamw_step(ParamStore& store, const TrainConfig& cfg) {
  check_finite(store);
  ++store.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.step));
  for (auto& p : store.params()) {
    if (!p.trainable) {
      std::fill(p.grad.begin(), p.grad.end(), 0.0);
      continue;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      p.value[i] *= 1.0 - cfg.learning_rate * cfg.weight_decay;
      p.value[i] -= cfg.learning_rate * (p.m[i] / bc1) / (std::sqrt(p.v[i] / bc2) + cfg.epsilon);
      p.grad[i] = 0.0;
    }
  }
}

void sgd_l2_step(ParamStore& store, double learning_rate, double l2) {
  check_finite(store);
  ++store.step;
  for (auto& p : store.params()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.trainable) p.value[i] -= learning_rate * (2.0 * l2 * p.value[i] + p.grad[i]);
      p.grad[i] = 0.0;
    }
  }
}

}  // namespace sploc::nn
