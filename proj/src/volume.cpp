#include "sploc/volume.hpp"

#include <cmath>
#include <string>

namespace sploc {

Volume::Volume(std::array<int, 3> dims, Vec3 spacing, std::vector<float> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  for (int d = 0; d < 3; ++d) {
    if (dims_[d] < kMinDim) {
      throw ValidationError("volume dimension " + std::to_string(d) + " is " + std::to_string(dims_[d]) +
                            ", minimum is " + std::to_string(kMinDim));
    }
    if (!(spacing_[d] > 0.0) || !std::isfinite(spacing_[d])) {
      throw ValidationError("volume spacing must be positive and finite");
    }
  }
  const std::size_t expected =
      static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]);
  if (data_.size() != expected) {
    throw ValidationError("volume data length " + std::to_string(data_.size()) + " does not match dims product " +
                          std::to_string(expected));
  }
}

Volume Volume::filled(std::array<int, 3> dims, Vec3 spacing, float value) {
  const std::size_t n =
      static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  return Volume(dims, spacing, std::vector<float>(n, value));
}

Vec3 Volume::voxel_center(int i, int j, int k) const {
  return {(i - 0.5 * (dims_[0] - 1)) * spacing_[0], (j - 0.5 * (dims_[1] - 1)) * spacing_[1],
          (k - 0.5 * (dims_[2] - 1)) * spacing_[2]};
}

Vec3 Volume::extent() const {
  return {dims_[0] * spacing_[0], dims_[1] * spacing_[1], dims_[2] * spacing_[2]};
}

double Volume::half_diagonal() const { return 0.5 * norm(extent()); }

double trilinear_sample(const Volume& volume, const Vec3& point) {
  const auto& dims = volume.dims();
  const auto& sp = volume.spacing();
  double idx[3];
  int base[3];
  double frac[3];
  for (int d = 0; d < 3; ++d) {
    idx[d] = point[d] / sp[d] + 0.5 * (dims[d] - 1);
    // Beyond one voxel past the edge every neighbour is padding.
    if (!(idx[d] > -1.0 && idx[d] < static_cast<double>(dims[d]))) return 0.0;
    const double fl = std::floor(idx[d]);
    base[d] = static_cast<int>(fl);
    frac[d] = idx[d] - fl;
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const int k = base[2] + dz;
    if (k < 0 || k >= dims[2]) continue;
    const double wz = dz ? frac[2] : 1.0 - frac[2];
    for (int dy = 0; dy < 2; ++dy) {
      const int j = base[1] + dy;
      if (j < 0 || j >= dims[1]) continue;
      const double wy = dy ? frac[1] : 1.0 - frac[1];
      for (int dx = 0; dx < 2; ++dx) {
        const int i = base[0] + dx;
        if (i < 0 || i >= dims[0]) continue;
        const double wx = dx ? frac[0] : 1.0 - frac[0];
        acc += wx * wy * wz * volume.at(i, j, k);
      }
    }
  }
  return acc;
}

Volume normalize_intensity(const Volume& raw) {
  std::vector<float> out(raw.size());
  const auto in = raw.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float v = in[i];
    if (!(v >= 0.0f && v <= 255.0f)) {
      throw ValidationError("raw intensity at index " + std::to_string(i) + " outside [0, 255]");
    }
    out[i] = static_cast<float>(static_cast<double>(v) / 255.0);
  }
  return Volume(raw.dims(), raw.spacing(), std::move(out));
}

}  // namespace sploc
