#include "sploc/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sploc {

NoiseSchedule NoiseSchedule::cosine(int steps, double offset, double max_beta) {
  if (steps < 2) throw ValidationError("noise schedule needs at least 2 steps");
  auto f = [&](int t) {
    const double c = std::cos(((static_cast<double>(t) / steps) + offset) / (1.0 + offset) * kPi / 2.0);
    return c * c;
  };
  NoiseSchedule s;
  s.betas_.assign(steps + 1, 0.0);
  s.alpha_bars_.assign(steps + 1, 1.0);
  const double f0 = f(0);
  for (int t = 1; t <= steps; ++t) {
    const double ratio = (f(t) / f0) / (f(t - 1) / f0);
    s.betas_[t] = std::min(1.0 - ratio, max_beta);
    s.alpha_bars_[t] = s.alpha_bars_[t - 1] * (1.0 - s.betas_[t]);
  }
  return s;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) throw ValidationError("timestep " + std::to_string(t) + " out of range");
  return alpha_bars_[t];
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps()) throw ValidationError("timestep " + std::to_string(t) + " out of range");
  return betas_[t];
}

std::vector<int> NoiseSchedule::inference_timesteps(int count) const {
  if (count < 1 || count > steps() || steps() % count != 0) {
    throw ValidationError("inference step count must divide the training step count");
  }
  const int stride = steps() / count;
  std::vector<int> ts(count);
  for (int i = 0; i < count; ++i) ts[i] = (count - 1 - i) * stride + 1;
  return ts;
}

Vec3 forward_noise(const NoiseSchedule& schedule, const Vec3& p0, int t, const Vec3& eps) {
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  return {a * p0[0] + b * eps[0], a * p0[1] + b * eps[1], a * p0[2] + b * eps[2]};
}

Vec3 ddim_step(const NoiseSchedule& schedule, const Vec3& p_t, int t, int t_prev, const Vec3& eps_hat) {
  if (t_prev > t) {
    throw ValidationError("ddim_step needs t_prev <= t (got t=" + std::to_string(t) + ", t_prev=" +
                          std::to_string(t_prev) + ")");
  }
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  const double s_t = std::sqrt(1.0 - ab), s_prev = std::sqrt(1.0 - ab_prev);
  const double a_t = std::sqrt(ab), a_prev = std::sqrt(ab_prev);
  Vec3 out;
  for (int d = 0; d < 3; ++d) {
    const double x0 = (p_t[d] - s_t * eps_hat[d]) / a_t;
    out[d] = a_prev * x0 + s_prev * eps_hat[d];
  }
  return out;
}

Vec3 ddim_sample(const NoiseSchedule& schedule, const std::vector<int>& timesteps, const Vec3& init,
                 const NoisePredictor& predictor) {
  Vec3 p = init;
  for (std::size_t i = 0; i < timesteps.size(); ++i) {
    const int t = timesteps[i];
    const int t_prev = i + 1 < timesteps.size() ? timesteps[i + 1] : 0;
    p = ddim_step(schedule, p, t, t_prev, predictor(p, t));
  }
  return p;
}

}  // namespace sploc
