#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sploc/plane.hpp"
#include "sploc/volume.hpp"

namespace sploc {

/// Synthetic morphology classes. The first three are the default label set;
/// the table extends to seven so larger label sets stay generatable.
std::vector<std::string> default_label_names(int num_classes = 3);
inline constexpr int kMaxPhantomClasses = 7;

struct PhantomSpec {
  int class_label = 0;
  int num_classes = 3;
  Vec3 rotation{0.0, 0.0, 0.0};  // Euler angles (x, y, z), radians; R = Rz·Ry·Rx
  Vec3 offset{0.0, 0.0, 0.0};    // shape centre, mm
  double scale = 20.0;           // longest semi-axis of the body, mm
  double noise_sigma = 10.0;     // raw intensity units (0-255 scale)
  std::uint64_t seed = 0;
  std::array<int, 3> dims{64, 64, 64};
  Vec3 spacing{1.0, 1.0, 1.0};
};

struct GroundTruth {
  PlaneParam plane;
  int label = 0;
};

struct Phantom {
  Volume volume;  // normalized to [0, 1]
  GroundTruth truth;
};

/// Symmetry axis of the canonical (unrotated) shape.
inline constexpr Vec3 kCanonicalNormal{0.0, 1.0, 0.0};

/// R = Rz(rz) · Ry(ry) · Rx(rx).
Mat3 rotation_matrix(const Vec3& euler);

/// Raw (0-255) phantom before normalization; exposed for contrast checks.
Volume render_phantom_raw(const PhantomSpec& spec, bool with_noise);

/// Pure function of the spec. The ground-truth plane is the mirror plane of
/// the rotated shape, which cuts through every class-defining cavity feature.
Phantom generate_phantom(const PhantomSpec& spec);

void validate(const PhantomSpec& spec);

}  // namespace sploc
