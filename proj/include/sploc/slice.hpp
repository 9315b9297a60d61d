#pragma once

#include <filesystem>
#include <vector>

#include "sploc/plane.hpp"
#include "sploc/volume.hpp"

namespace sploc {

/// Square-pixel 2D image resampled from a volume. Row-major, row index along v.
struct SliceImage {
  int width = 0;
  int height = 0;
  double fov = 0.0;  // mm spanned by the full width
  std::vector<double> pixels;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr int kDefaultSliceSize = 224;

/// Field of view covering the volume's largest physical extent.
double default_fov(const Volume& volume);

/// Samples a size×size grid spanning fov×fov mm centred at the tangent point,
/// axes from in_plane_basis. Pixel centres sit at (i + 0.5 - size/2) * fov/size.
SliceImage slice_volume(const Volume& volume, const PlaneParam& plane, int size, double fov);

/// Binary PGM (P5, maxval 255); intensities are clamped to [0, 1] and rounded.
void write_pgm(const SliceImage& image, const std::filesystem::path& path);

}  // namespace sploc
