#include "sploc/kernels.hpp"

#include <algorithm>

namespace sploc::kernels {

namespace {

inline Vec3 pixel_point(const SliceGrid& g, int x, int y) {
  const double step = g.fov / g.size;
  const double a = (x + 0.5 - 0.5 * g.size) * step;
  const double b = (y + 0.5 - 0.5 * g.size) * step;
  return {g.center[0] + a * g.u[0] + b * g.v[0], g.center[1] + a * g.u[1] + b * g.v[1],
          g.center[2] + a * g.u[2] + b * g.v[2]};
}

inline int cell_of(int i, int n, int grid) { return static_cast<int>((static_cast<long>(i) * grid) / n); }

struct Window {
  double ma, mb, va, vb, cov;
};

double ssim_from_moments(const Window& w, const SsimParams& p) {
  return ((2.0 * w.ma * w.mb + p.c1) * (2.0 * w.cov + p.c2)) /
         ((w.ma * w.ma + w.mb * w.mb + p.c1) * (w.va + w.vb + p.c2));
}

void check_ssim_args(std::span<const double> a, std::span<const double> b, int width, int height,
                     const SsimParams& p) {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("ssim: image sizes differ");
  }
  if (width < p.window || height < p.window) throw ValidationError("ssim: image smaller than window");
}

}  // namespace

void slice_serial(const Volume& volume, const SliceGrid& grid, std::span<double> out) {
  for (int y = 0; y < grid.size; ++y) {
    for (int x = 0; x < grid.size; ++x) {
      out[static_cast<std::size_t>(y) * grid.size + x] = trilinear_sample(volume, pixel_point(grid, x, y));
    }
  }
}

void slice_parallel(const Volume& volume, const SliceGrid& grid, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < grid.size; ++y) {
    for (int x = 0; x < grid.size; ++x) {
      out[static_cast<std::size_t>(y) * grid.size + x] = trilinear_sample(volume, pixel_point(grid, x, y));
    }
  }
}

std::vector<double> pool_volume_serial(const Volume& volume, int grid) {
  const auto& d = volume.dims();
  std::vector<double> sum(static_cast<std::size_t>(grid) * grid * grid, 0.0);
  std::vector<int> count(sum.size(), 0);
  for (int k = 0; k < d[2]; ++k) {
    const int ck = cell_of(k, d[2], grid);
    for (int j = 0; j < d[1]; ++j) {
      const int cj = cell_of(j, d[1], grid);
      for (int i = 0; i < d[0]; ++i) {
        const std::size_t c = static_cast<std::size_t>(cell_of(i, d[0], grid)) + grid * (cj + static_cast<std::size_t>(grid) * ck);
        sum[c] += volume.at(i, j, k);
        ++count[c];
      }
    }
  }
  for (std::size_t c = 0; c < sum.size(); ++c) sum[c] /= count[c];
  return sum;
}

std::vector<double> pool_volume_parallel(const Volume& volume, int grid) {
  const auto& d = volume.dims();
  std::vector<double> out(static_cast<std::size_t>(grid) * grid * grid, 0.0);
  // One output cell per iteration; the voxel traversal order inside a cell
  // matches the serial kernel so both produce identical sums.
#pragma omp parallel for schedule(static) collapse(2)
  for (int ck = 0; ck < grid; ++ck) {
    for (int cj = 0; cj < grid; ++cj) {
      std::vector<double> row_sum(grid, 0.0);
      std::vector<int> row_count(grid, 0);
      for (int k = 0; k < d[2]; ++k) {
        if (cell_of(k, d[2], grid) != ck) continue;
        for (int j = 0; j < d[1]; ++j) {
          if (cell_of(j, d[1], grid) != cj) continue;
          for (int i = 0; i < d[0]; ++i) {
            const int ci = cell_of(i, d[0], grid);
            row_sum[ci] += volume.at(i, j, k);
            ++row_count[ci];
          }
        }
      }
      for (int ci = 0; ci < grid; ++ci) {
        out[static_cast<std::size_t>(ci) + grid * (cj + static_cast<std::size_t>(grid) * ck)] = row_sum[ci] / row_count[ci];
      }
    }
  }
  return out;
}

std::vector<double> pool_image(std::span<const double> pixels, int width, int height, int grid) {
  std::vector<double> sum(static_cast<std::size_t>(grid) * grid, 0.0);
  std::vector<int> count(sum.size(), 0);
  for (int y = 0; y < height; ++y) {
    const int cy = cell_of(y, height, grid);
    for (int x = 0; x < width; ++x) {
      const std::size_t c = static_cast<std::size_t>(cy) * grid + cell_of(x, width, grid);
      sum[c] += pixels[static_cast<std::size_t>(y) * width + x];
      ++count[c];
    }
  }
  for (std::size_t c = 0; c < sum.size(); ++c) sum[c] /= count[c];
  return sum;
}

double ssim_serial(std::span<const double> a, std::span<const double> b, int width, int height,
                   const SsimParams& p) {
  check_ssim_args(a, b, width, height, p);
  const int w = p.window;
  const double n = static_cast<double>(w) * w;
  double total = 0.0;
  for (int y0 = 0; y0 + w <= height; ++y0) {
    for (int x0 = 0; x0 + w <= width; ++x0) {
      Window win{0, 0, 0, 0, 0};
      for (int y = y0; y < y0 + w; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          win.ma += a[static_cast<std::size_t>(y) * width + x];
          win.mb += b[static_cast<std::size_t>(y) * width + x];
        }
      }
      win.ma /= n;
      win.mb /= n;
      for (int y = y0; y < y0 + w; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          const double da = a[static_cast<std::size_t>(y) * width + x] - win.ma;
          const double db = b[static_cast<std::size_t>(y) * width + x] - win.mb;
          win.va += da * da;
          win.vb += db * db;
          win.cov += da * db;
        }
      }
      win.va /= n;
      win.vb /= n;
      win.cov /= n;
      total += ssim_from_moments(win, p);
    }
  }
  return total / (static_cast<double>(width - w + 1) * (height - w + 1));
}

double ssim_parallel(std::span<const double> a, std::span<const double> b, int width, int height,
                     const SsimParams& p) {
  check_ssim_args(a, b, width, height, p);
  const int w = p.window;
  const std::size_t sw = static_cast<std::size_t>(width) + 1;
  const std::size_t cells = sw * (height + 1);
  // Summed-area tables of a, b, a², b², ab.
  std::vector<double> sat(5 * cells, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double va = a[static_cast<std::size_t>(y) * width + x];
      const double vb = b[static_cast<std::size_t>(y) * width + x];
      const double vals[5] = {va, vb, va * va, vb * vb, va * vb};
      const std::size_t c = (y + 1) * sw + (x + 1);
      for (int t = 0; t < 5; ++t) {
        double* s = sat.data() + t * cells;
        s[c] = vals[t] + s[c - 1] + s[c - sw] - s[c - sw - 1];
      }
    }
  }
  const double n = static_cast<double>(w) * w;
  const int rows = height - w + 1;
  const int cols = width - w + 1;
  std::vector<double> row_totals(rows, 0.0);
#pragma omp parallel for schedule(static)
  for (int y0 = 0; y0 < rows; ++y0) {
    double acc = 0.0;
    for (int x0 = 0; x0 < cols; ++x0) {
      double s[5];
      const std::size_t c11 = (y0 + w) * sw + (x0 + w), c01 = y0 * sw + (x0 + w);
      const std::size_t c10 = (y0 + w) * sw + x0, c00 = y0 * sw + x0;
      for (int t = 0; t < 5; ++t) {
        const double* q = sat.data() + t * cells;
        s[t] = q[c11] - q[c01] - q[c10] + q[c00];
      }
      Window win;
      win.ma = s[0] / n;
      win.mb = s[1] / n;
      win.va = std::max(0.0, s[2] / n - win.ma * win.ma);
      win.vb = std::max(0.0, s[3] / n - win.mb * win.mb);
      win.cov = s[4] / n - win.ma * win.mb;
      acc += ssim_from_moments(win, p);
    }
    row_totals[y0] = acc;
  }
  double total = 0.0;
  for (double r : row_totals) total += r;
  return total / (static_cast<double>(rows) * cols);
}

}  // namespace sploc::kernels
