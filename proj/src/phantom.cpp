#include "sploc/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "sploc/rng.hpp"

namespace sploc {

namespace {

constexpr double kBackground = 40.0;
constexpr double kWall = 140.0;
constexpr double kCavity = 230.0;
constexpr double kEdgeMm = 0.7;

struct Ellipsoid {
  Vec3 center;
  Vec3 axes;
};

/// Soft membership in (0, 1); the implicit function is scaled by the
/// smallest semi-axis so the transition width is roughly kEdgeMm.
double soft_inside(const Ellipsoid& e, const Vec3& q) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double t = (q[d] - e.center[d]) / e.axes[d];
    s += t * t;
  }
  const double dist = (std::sqrt(s) - 1.0) * std::min({e.axes[0], e.axes[1], e.axes[2]});
  return 1.0 / (1.0 + std::exp(dist / kEdgeMm));
}

double soft_union(double a, double b) { return std::max(a, b); }

/// Slab |q_x| < half_width above z_min; used for septa.
double soft_slab(const Vec3& q, double half_width, double z_min) {
  const double across = 1.0 / (1.0 + std::exp((std::abs(q[0]) - half_width) / kEdgeMm));
  const double along = 1.0 / (1.0 + std::exp((z_min - q[2]) / kEdgeMm));
  return across * along;
}

struct Morphology {
  double wall;
  double cavity;
};

// Canonical frame: x lateral, y thin (mirror axis), z long axis.
Morphology evaluate(int label, double s, const Vec3& q) {
  const Ellipsoid body{{0, 0, 0}, {0.8 * s, 0.35 * s, s}};
  const Ellipsoid cavity{{0, 0, 0.15 * s}, {0.42 * s, 0.13 * s, 0.6 * s}};
  switch (label) {
    case 0:  // single-lobe
      return {soft_inside(body, q), soft_inside(cavity, q)};
    case 1: {  // bifurcated: two horns over a shared lower body
      const Ellipsoid left{{-0.45 * s, 0, 0.3 * s}, {0.42 * s, 0.35 * s, 0.65 * s}};
      const Ellipsoid right{{0.45 * s, 0, 0.3 * s}, {0.42 * s, 0.35 * s, 0.65 * s}};
      const Ellipsoid lower{{0, 0, -0.35 * s}, {0.55 * s, 0.35 * s, 0.6 * s}};
      const Ellipsoid lc{{-0.45 * s, 0, 0.35 * s}, {0.17 * s, 0.13 * s, 0.45 * s}};
      const Ellipsoid rc{{0.45 * s, 0, 0.35 * s}, {0.17 * s, 0.13 * s, 0.45 * s}};
      return {soft_union(soft_union(soft_inside(left, q), soft_inside(right, q)), soft_inside(lower, q)),
              soft_union(soft_inside(lc, q), soft_inside(rc, q))};
    }
    case 2:  // septated: single body, cavity split by a midline septum
      return {soft_inside(body, q), soft_inside(cavity, q) * (1.0 - soft_slab(q, 0.09 * s, -0.25 * s))};
    case 3: {  // arcuate: shallow fundal dent in the cavity
      const Ellipsoid dent{{0, 0, 0.78 * s}, {0.18 * s, 0.3 * s, 0.22 * s}};
      return {soft_inside(body, q), soft_inside(cavity, q) * (1.0 - soft_inside(dent, q))};
    }
    case 4: {  // t-shaped: narrow cavity
      const Ellipsoid narrow{{0, 0, 0.1 * s}, {0.16 * s, 0.13 * s, 0.6 * s}};
      return {soft_inside(body, q), soft_inside(narrow, q)};
    }
    case 5: {  // single-horn: one lateral horn
      const Ellipsoid horn{{0.3 * s, 0, 0.1 * s}, {0.5 * s, 0.35 * s, 0.9 * s}};
      const Ellipsoid hc{{0.3 * s, 0, 0.2 * s}, {0.18 * s, 0.13 * s, 0.55 * s}};
      return {soft_inside(horn, q), soft_inside(hc, q)};
    }
    default: {  // duplex: two separate bodies
      const Ellipsoid left{{-0.5 * s, 0, 0}, {0.38 * s, 0.35 * s, 0.95 * s}};
      const Ellipsoid right{{0.5 * s, 0, 0}, {0.38 * s, 0.35 * s, 0.95 * s}};
      const Ellipsoid lc{{-0.5 * s, 0, 0.1 * s}, {0.14 * s, 0.13 * s, 0.55 * s}};
      const Ellipsoid rc{{0.5 * s, 0, 0.1 * s}, {0.14 * s, 0.13 * s, 0.55 * s}};
      return {soft_union(soft_inside(left, q), soft_inside(right, q)),
              soft_union(soft_inside(lc, q), soft_inside(rc, q))};
    }
  }
}

}  // namespace

std::vector<std::string> default_label_names(int num_classes) {
  static const std::vector<std::string> table{"single-lobe", "bifurcated", "septated",  "arcuate",
                                              "t-shaped",    "single-horn", "duplex"};
  if (num_classes < 2 || num_classes > kMaxPhantomClasses) {
    throw ValidationError("number of phantom classes must be in [2, 7]");
  }
  return {table.begin(), table.begin() + num_classes};
}

Mat3 rotation_matrix(const Vec3& e) {
  const double cx = std::cos(e[0]), sx = std::sin(e[0]);
  const double cy = std::cos(e[1]), sy = std::sin(e[1]);
  const double cz = std::cos(e[2]), sz = std::sin(e[2]);
  return Mat3{Vec3{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
              Vec3{sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
              Vec3{-sy, cy * sx, cy * cx}};
}

void validate(const PhantomSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > kMaxPhantomClasses) {
    throw ValidationError("phantom num_classes must be in [2, 7]");
  }
  if (spec.class_label < 0 || spec.class_label >= spec.num_classes) {
    throw ValidationError("phantom class_label outside the label set");
  }
  if (!(spec.scale > 0.0)) throw ValidationError("phantom scale must be positive");
  if (!(spec.noise_sigma >= 0.0)) throw ValidationError("phantom noise_sigma must be non-negative");
  for (int d = 0; d < 3; ++d) {
    if (!std::isfinite(spec.rotation[d]) || !std::isfinite(spec.offset[d])) {
      throw ValidationError("phantom rotation and offset must be finite");
    }
    if (spec.dims[d] < Volume::kMinDim) throw ValidationError("phantom dims below minimum");
  }
}

Volume render_phantom_raw(const PhantomSpec& spec, bool with_noise) {
  validate(spec);
  const Mat3 rot = rotation_matrix(spec.rotation);
  const auto& dims = spec.dims;
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::vector<float> data(n);
  // Geometry first; it is parallel and order-free.
  Volume grid = Volume::filled(dims, spec.spacing, 0.0f);
#pragma omp parallel for schedule(static) collapse(2)
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const Vec3 q = mat_t_vec(rot, grid.voxel_center(i, j, k) - spec.offset);
        const Morphology m = evaluate(spec.class_label, spec.scale, q);
        const double v = kBackground + (kWall - kBackground) * m.wall + (kCavity - kWall) * m.cavity * m.wall;
        data[static_cast<std::size_t>(i) + dims[0] * (j + static_cast<std::size_t>(dims[1]) * k)] =
            static_cast<float>(v);
      }
    }
  }
  if (with_noise && spec.noise_sigma > 0.0) {
    // Noise is drawn serially so the sequence is independent of thread count.
    Rng rng(mix_seed(spec.seed, 17));
    for (auto& v : data) {
      v = static_cast<float>(std::clamp(v + spec.noise_sigma * rng.normal(), 0.0, 255.0));
    }
  }
  return Volume(dims, spec.spacing, std::move(data));
}

Phantom generate_phantom(const PhantomSpec& spec) {
  Volume volume = normalize_intensity(render_phantom_raw(spec, true));
  const Vec3 normal = mat_vec(rotation_matrix(spec.rotation), kCanonicalNormal);
  const PlaneParam plane = plane_from_normal(normal, dot(normalized(normal), spec.offset));
  return Phantom{std::move(volume), GroundTruth{plane, spec.class_label}};
}

}  // namespace sploc
