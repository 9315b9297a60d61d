#pragma once

#include <span>
#include <vector>

#include "sploc/common.hpp"

namespace sploc {

/// Tangent-point plane: the plane {x : n·x = r} with unit normal
/// n = (sinθ cosη, sinθ sinη, cosθ). θ is measured from +z, η from +x.
struct PlaneParam {
  double r = 0.0;      // signed tangent distance, mm
  double eta = 0.0;    // azimuth, [0, 2π)
  double theta = 0.0;  // polar angle, [0, π]
};

/// Diffused representation in [-1, 1]^3: (r / r_max, η/π - 1, 2θ/π - 1).
using NormalizedParam = Vec3;

struct CartesianPlane {
  Vec3 normal;
  Vec3 point;  // r * normal, the tangent point
};

/// Brings angles into their canonical ranges without changing the oriented plane.
PlaneParam canonicalize(PlaneParam p);

/// Builds the canonical parameters of the plane {x : n·x = r} for an arbitrary non-zero n.
PlaneParam plane_from_normal(const Vec3& normal, double r);

CartesianPlane to_cartesian(const PlaneParam& p);

/// Deterministic in-plane basis: u = normalize(n × z), falling back to
/// normalize(n × x) when ‖n × z‖ < 1e-6; v = n × u.
std::pair<Vec3, Vec3> in_plane_basis(const Vec3& normal);

/// Unoriented angle between plane normals, degrees in [0, 90].
double angle_metric(const PlaneParam& a, const PlaneParam& b);

/// Difference of absolute plane-to-origin distances, mm.
double distance_metric(const PlaneParam& a, const PlaneParam& b);

NormalizedParam normalize_param(const PlaneParam& p, double r_max);

/// Inverse of normalize_param. Clamps r and θ into range and wraps η, so any
/// point of R^3 (e.g. a noisy diffusion state) maps to a valid plane.
PlaneParam denormalize_param(const NormalizedParam& u, double r_max);

/// Arithmetic mean of r and θ, circular mean of η. Throws on an empty list.
PlaneParam mean_param(std::span<const PlaneParam> params);

}  // namespace sploc
