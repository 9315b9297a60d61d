#pragma once

#include <functional>
#include <vector>

#include "sploc/common.hpp"

namespace sploc {

/// Cumulative noise levels ᾱ_t for t = 0..T with ᾱ_0 = 1 (no noise).
class NoiseSchedule {
 public:
  /// f(t) = cos²(((t/T) + s)/(1 + s) · π/2); β_t = min(1 - f(t)/f(t-1), max_beta);
  /// ᾱ_t = Π_{s≤t}(1 - β_s), so the clipped final step stays strictly positive.
  static NoiseSchedule cosine(int steps, double offset = 0.008, double max_beta = 0.999);

  int steps() const { return static_cast<int>(betas_.size()) - 1; }
  double alpha_bar(int t) const;
  double beta(int t) const;
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }
  const std::vector<double>& betas() const { return betas_; }  // betas_[0] unused (0)

  /// `count` descending timesteps evenly strided over [1, T]: with T = 1000 and
  /// count = 100 these are 991, 981, ..., 1. Each step moves to the next entry,
  /// the last one to t = 0.
  std::vector<int> inference_timesteps(int count) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

/// p_t = sqrt(ᾱ_t) p_0 + sqrt(1 - ᾱ_t) ε
Vec3 forward_noise(const NoiseSchedule& schedule, const Vec3& p0, int t, const Vec3& eps);

/// Deterministic reverse update:
///   p_prev = sqrt(ᾱ_prev) · (p_t - sqrt(1-ᾱ_t) ε̂) / sqrt(ᾱ_t) + sqrt(1-ᾱ_prev) ε̂
/// Requires 0 ≤ t_prev ≤ t ≤ T; t_prev == t is the identity.
Vec3 ddim_step(const NoiseSchedule& schedule, const Vec3& p_t, int t, int t_prev, const Vec3& eps_hat);

using NoisePredictor = std::function<Vec3(const Vec3& p_t, int t)>;

/// Runs the chain over `timesteps` (descending) from `init`, ending at t = 0.
Vec3 ddim_sample(const NoiseSchedule& schedule, const std::vector<int>& timesteps, const Vec3& init,
                 const NoisePredictor& predictor);

}  // namespace sploc
