#include "sploc/plane.hpp"

#include <algorithm>
#include <cmath>

namespace sploc {

PlaneParam canonicalize(PlaneParam p) {
  double theta = wrap_two_pi(p.theta);
  double eta = p.eta;
  if (theta > kPi) {
    theta = kTwoPi - theta;
    eta += kPi;
  }
  return {p.r, wrap_two_pi(eta), theta};
}

PlaneParam plane_from_normal(const Vec3& normal, double r) {
  const Vec3 n = normalized(normal);
  const double theta = std::acos(std::clamp(n[2], -1.0, 1.0));
  const double eta = wrap_two_pi(std::atan2(n[1], n[0]));
  return {r, eta, theta};
}

CartesianPlane to_cartesian(const PlaneParam& p) {
  const double st = std::sin(p.theta);
  const Vec3 n{st * std::cos(p.eta), st * std::sin(p.eta), std::cos(p.theta)};
  return {n, p.r * n};
}

std::pair<Vec3, Vec3> in_plane_basis(const Vec3& normal) {
  Vec3 u = cross(normal, Vec3{0.0, 0.0, 1.0});
  if (norm(u) < 1e-6) u = cross(normal, Vec3{1.0, 0.0, 0.0});
  u = normalized(u);
  const Vec3 v = cross(normal, u);
  return {u, v};
}

double angle_metric(const PlaneParam& a, const PlaneParam& b) {
  const double c = std::abs(dot(to_cartesian(a).normal, to_cartesian(b).normal));
  return std::acos(std::min(1.0, c)) * 180.0 / kPi;
}

double distance_metric(const PlaneParam& a, const PlaneParam& b) { return std::abs(std::abs(a.r) - std::abs(b.r)); }

NormalizedParam normalize_param(const PlaneParam& p, double r_max) {
  return {p.r / r_max, p.eta / kPi - 1.0, 2.0 * p.theta / kPi - 1.0};
}

PlaneParam denormalize_param(const NormalizedParam& u, double r_max) {
  const double r = std::clamp(u[0], -1.0, 1.0) * r_max;
  const double eta = wrap_two_pi((u[1] + 1.0) * kPi);
  const double theta = (std::clamp(u[2], -1.0, 1.0) + 1.0) * 0.5 * kPi;
  return {r, eta, theta};
}

PlaneParam mean_param(std::span<const PlaneParam> params) {
  if (params.empty()) throw ValidationError("mean_param of an empty list");
  double r = 0.0, s = 0.0, c = 0.0, theta = 0.0;
  for (const auto& p : params) {
    r += p.r;
    s += std::sin(p.eta);
    c += std::cos(p.eta);
    theta += p.theta;
  }
  const double n = static_cast<double>(params.size());
  double eta = wrap_two_pi(std::atan2(s / n, c / n));
  // Exact cancellation of a near-full-turn wrap can leave -0 or 2π rounding residue.
  if (eta > kTwoPi - 1e-12) eta = 0.0;
  return {r / n, eta, theta / n};
}

}  // namespace sploc
