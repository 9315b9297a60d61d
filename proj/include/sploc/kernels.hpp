#pragma once

// Data-parallel hot loops. Each OpenMP kernel has a serial reference with the
// same signature; tests assert they agree and bench/ compares their speed.
// Parallel kernels write disjoint outputs only, so results do not depend on
// the thread count.

#include <span>
#include <vector>

#include "sploc/volume.hpp"

namespace sploc::kernels {

struct SliceGrid {
  Vec3 center;
  Vec3 u;
  Vec3 v;
  int size;
  double fov;
};

void slice_serial(const Volume& volume, const SliceGrid& grid, std::span<double> out);
void slice_parallel(const Volume& volume, const SliceGrid& grid, std::span<double> out);

/// Block-average onto a grid³ lattice; voxel i falls into cell floor(i*grid/n).
std::vector<double> pool_volume_serial(const Volume& volume, int grid);
std::vector<double> pool_volume_parallel(const Volume& volume, int grid);

/// Block-average of a width×height image onto grid×grid cells.
std::vector<double> pool_image(std::span<const double> pixels, int width, int height, int grid);

struct SsimParams {
  int window = 8;
  double c1 = 0.0001;  // (0.01 L)^2, L = 1
  double c2 = 0.0009;  // (0.03 L)^2
};

/// Mean SSIM over all window×window windows at stride 1. Population moments.
double ssim_serial(std::span<const double> a, std::span<const double> b, int width, int height,
                   const SsimParams& params);
/// Same result via summed-area tables with rows split across threads.
double ssim_parallel(std::span<const double> a, std::span<const double> b, int width, int height,
                     const SsimParams& params);

}  // namespace sploc::kernels
