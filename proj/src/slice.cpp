#include "sploc/slice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sploc/kernels.hpp"

namespace sploc {

double default_fov(const Volume& volume) {
  const Vec3 e = volume.extent();
  return std::max({e[0], e[1], e[2]});
}

SliceImage slice_volume(const Volume& volume, const PlaneParam& plane, int size, double fov) {
  if (size < 2) throw ValidationError("slice size must be at least 2");
  if (!(fov > 0.0)) throw ValidationError("slice fov must be positive");
  const CartesianPlane cp = to_cartesian(plane);
  const auto [u, v] = in_plane_basis(cp.normal);
  SliceImage img{size, size, fov, std::vector<double>(static_cast<std::size_t>(size) * size)};
  kernels::slice_parallel(volume, kernels::SliceGrid{cp.point, u, v, size, fov}, img.pixels);
  return img;
}

void write_pgm(const SliceImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace sploc
