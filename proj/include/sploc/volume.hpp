#pragma once

#include <array>
#include <span>
#include <vector>

#include "sploc/common.hpp"

namespace sploc {

/// Dense scalar grid with physical spacing. Voxel (i, j, k) sits at
/// ((i - (nx-1)/2) * sx, ...) mm, so the physical origin is the volume center.
/// Data is x-fastest: index = i + nx * (j + ny * k).
class Volume {
 public:
  static constexpr int kMinDim = 8;

  Volume(std::array<int, 3> dims, Vec3 spacing, std::vector<float> data);

  static Volume filled(std::array<int, 3> dims, Vec3 spacing, float value);

  const std::array<int, 3>& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  std::span<const float> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  float at(int i, int j, int k) const {
    return data_[static_cast<std::size_t>(i) +
                 static_cast<std::size_t>(dims_[0]) *
                     (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k)];
  }

  /// Physical position of a voxel center.
  Vec3 voxel_center(int i, int j, int k) const;
  /// Physical size along each axis (n * spacing).
  Vec3 extent() const;
  /// Half the length of the physical diagonal; bounds |r| for intersecting planes.
  double half_diagonal() const;

 private:
  std::array<int, 3> dims_;
  Vec3 spacing_;
  std::vector<float> data_;
};

/// Trilinear interpolation with zero padding outside the grid.
double trilinear_sample(const Volume& volume, const Vec3& point);

/// Divides raw 0-255 intensities by 255.
Volume normalize_intensity(const Volume& raw);

}  // namespace sploc
