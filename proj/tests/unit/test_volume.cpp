#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "sploc/phantom.hpp"
#include "sploc/slice.hpp"
#include "sploc/volume.hpp"
#include "sploc/volume_io.hpp"
#include "test_util.hpp"

namespace sploc {
namespace {

Volume ramp_volume(std::array<int, 3> dims, Vec3 spacing, const Vec3& a, double b) {
  Volume probe = Volume::filled(dims, spacing, 0.0f);
  std::vector<float> data(probe.size());
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        data[i + dims[0] * (j + dims[1] * k)] = static_cast<float>(dot(a, probe.voxel_center(i, j, k)) + b);
      }
  return Volume(dims, spacing, std::move(data));
}

TEST(Volume, RejectsBadShapes) {
  EXPECT_THROW(Volume({4, 8, 8}, {1, 1, 1}, std::vector<float>(256)), ValidationError);
  EXPECT_THROW(Volume({8, 8, 8}, {1, 1, 1}, std::vector<float>(511)), ValidationError);
  EXPECT_THROW(Volume({8, 8, 8}, {1, 0, 1}, std::vector<float>(512)), ValidationError);
}

TEST(Volume, OriginAtCenter) {
  const Volume v = Volume::filled({8, 10, 12}, {1.0, 2.0, 0.5}, 0.0f);
  const Vec3 lo = v.voxel_center(0, 0, 0);
  const Vec3 hi = v.voxel_center(7, 9, 11);
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(lo[d], -hi[d], 1e-12);
  EXPECT_NEAR(lo[0], -3.5, 1e-12);
  EXPECT_NEAR(lo[1], -9.0, 1e-12);
  EXPECT_NEAR(v.extent()[2], 6.0, 1e-12);
}

TEST(Trilinear, VoxelCenterReturnsVoxel) {
  Rng rng(3);
  std::vector<float> data(512);
  for (auto& x : data) x = static_cast<float>(rng.uniform());
  const Volume v({8, 8, 8}, {1, 1, 1}, data);
  EXPECT_DOUBLE_EQ(trilinear_sample(v, v.voxel_center(2, 5, 6)), v.at(2, 5, 6));
  EXPECT_DOUBLE_EQ(trilinear_sample(v, v.voxel_center(0, 0, 0)), v.at(0, 0, 0));
}

TEST(Trilinear, MidpointAveragesNeighbours) {
  std::vector<float> data(512, 0.0f);
  data[4 + 8 * (3 + 8 * 3)] = 1.0f;
  const Volume v({8, 8, 8}, {1, 1, 1}, data);
  const Vec3 mid = 0.5 * (v.voxel_center(3, 3, 3) + v.voxel_center(4, 3, 3));
  EXPECT_NEAR(trilinear_sample(v, mid), 0.5, 1e-12);
}

TEST(Trilinear, OutsideIsZero) {
  const Volume v = Volume::filled({8, 8, 8}, {1, 1, 1}, 1.0f);
  EXPECT_EQ(trilinear_sample(v, {100.0, 0.0, 0.0}), 0.0);
  EXPECT_EQ(trilinear_sample(v, {0.0, -50.0, 3.0}), 0.0);
}

TEST(Trilinear, ExactOnAffineField) {
  const Vec3 a{0.02, -0.01, 0.015};
  const Volume v = ramp_volume({12, 10, 9}, {1.0, 1.5, 2.0}, a, 0.5);
  Rng rng(11);
  double worst = 0.0;
  for (int n = 0; n < 500; ++n) {
    const Vec3 lo = v.voxel_center(0, 0, 0);
    const Vec3 p{rng.uniform(lo[0], -lo[0]), rng.uniform(lo[1], -lo[1]), rng.uniform(lo[2], -lo[2])};
    worst = std::max(worst, std::abs(trilinear_sample(v, p) - (dot(a, p) + 0.5)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Normalize, DividesBy255) {
  const Volume zero = normalize_intensity(Volume::filled({8, 8, 8}, {1, 1, 1}, 0.0f));
  for (float x : zero.data()) EXPECT_EQ(x, 0.0f);
  const Volume full = normalize_intensity(Volume::filled({8, 8, 8}, {1, 1, 1}, 255.0f));
  for (float x : full.data()) EXPECT_FLOAT_EQ(x, 1.0f);
  const Volume v = normalize_intensity(Volume::filled({8, 8, 8}, {1, 1, 1}, 51.0f));
  EXPECT_NEAR(v.data()[0], 0.2, 1e-7);
}

TEST(Normalize, RejectsOutOfRange) {
  EXPECT_THROW(normalize_intensity(Volume::filled({8, 8, 8}, {1, 1, 1}, 256.0f)), ValidationError);
  EXPECT_THROW(normalize_intensity(Volume::filled({8, 8, 8}, {1, 1, 1}, -1.0f)), ValidationError);
}

PhantomSpec small_spec(int label, std::uint64_t seed) {
  PhantomSpec s;
  s.class_label = label;
  s.seed = seed;
  s.dims = {32, 32, 32};
  s.scale = 11.0;
  return s;
}

TEST(Phantom, Deterministic) {
  const Phantom a = generate_phantom(small_spec(1, 7));
  const Phantom b = generate_phantom(small_spec(1, 7));
  ASSERT_EQ(a.volume.size(), b.volume.size());
  EXPECT_EQ(std::memcmp(a.volume.data().data(), b.volume.data().data(), a.volume.size() * sizeof(float)), 0);
  const Phantom c = generate_phantom(small_spec(1, 8));
  EXPECT_NE(std::memcmp(a.volume.data().data(), c.volume.data().data(), a.volume.size() * sizeof(float)), 0);
}

TEST(Phantom, UnrotatedNormalIsCanonicalAxis) {
  const Phantom p = generate_phantom(small_spec(0, 1));
  const Vec3 n = to_cartesian(p.truth.plane).normal;
  EXPECT_NEAR(std::abs(dot(n, kCanonicalNormal)), 1.0, 1e-12);
  EXPECT_NEAR(p.truth.plane.r, 0.0, 1e-12);
  EXPECT_EQ(p.truth.label, 0);
}

TEST(Phantom, RotatedNormalMatchesIndependentRotation) {
  Rng rng(5);
  for (int n = 0; n < 20; ++n) {
    PhantomSpec s = small_spec(n % 3, n);
    s.rotation = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    s.offset = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    s.noise_sigma = 0.0;
    const Phantom p = generate_phantom(s);
    // R = Rz Ry Rx applied to (0, 1, 0), composed by hand.
    const double cx = std::cos(s.rotation[0]), sx = std::sin(s.rotation[0]);
    const double cy = std::cos(s.rotation[1]), sy = std::sin(s.rotation[1]);
    const double cz = std::cos(s.rotation[2]), sz = std::sin(s.rotation[2]);
    Vec3 v{0.0, cx, sx};
    v = {cy * v[0] + sy * v[2], v[1], -sy * v[0] + cy * v[2]};
    v = {cz * v[0] - sz * v[1], sz * v[0] + cz * v[1], v[2]};
    const CartesianPlane c = to_cartesian(p.truth.plane);
    const double sign = dot(c.normal, v) < 0 ? -1.0 : 1.0;
    for (int d = 0; d < 3; ++d) EXPECT_NEAR(sign * c.normal[d], v[d], 1e-9);
    EXPECT_NEAR(sign * p.truth.plane.r, dot(v, s.offset), 1e-9);
  }
}

TEST(Phantom, ContrastBeforeNoise) {
  PhantomSpec s = small_spec(0, 2);
  const Volume raw = render_phantom_raw(s, false);
  const double inside = trilinear_sample(raw, {0.0, 0.0, -4.0}) / 255.0;
  const double outside = raw.at(0, 0, 0) / 255.0;
  EXPECT_GE(inside - outside, 0.3);
}

TEST(Phantom, NormalizedRange) {
  const Phantom p = generate_phantom(small_spec(2, 4));
  for (float x : p.volume.data()) {
    ASSERT_GE(x, 0.0f);
    ASSERT_LE(x, 1.0f);
  }
}

TEST(Phantom, ClassVisibleInTruthSlice) {
  // The septum darkens the cavity centre of class 2 relative to class 0.
  PhantomSpec a = small_spec(0, 3), b = small_spec(2, 3);
  a.noise_sigma = b.noise_sigma = 0.0;
  const Phantom pa = generate_phantom(a), pb = generate_phantom(b);
  const SliceImage sa = slice_volume(pa.volume, pa.truth.plane, 32, 32.0);
  const SliceImage sb = slice_volume(pb.volume, pb.truth.plane, 32, 32.0);
  EXPECT_GT(sa.at(16, 14) - sb.at(16, 14), 0.15);
  double diff = 0.0;
  for (std::size_t i = 0; i < sa.pixels.size(); ++i) diff += std::abs(sa.pixels[i] - sb.pixels[i]);
  EXPECT_GT(diff / sa.pixels.size(), 0.005);
}

TEST(Phantom, RejectsInvalidSpec) {
  PhantomSpec s = small_spec(0, 1);
  s.noise_sigma = -1.0;
  EXPECT_THROW(generate_phantom(s), ValidationError);
  s = small_spec(3, 1);
  EXPECT_THROW(generate_phantom(s), ValidationError);
  s = small_spec(0, 1);
  s.scale = 0.0;
  EXPECT_THROW(generate_phantom(s), ValidationError);
}

TEST(VolumeIo, RoundTripWithSidecar) {
  testing::TempDir dir("vio");
  const Phantom p = generate_phantom(small_spec(1, 9));
  VolumeSidecar side{p.truth, default_label_names(3), 9};
  save_volume(dir / "v.pdv", p.volume, side);
  const LoadedVolume l = load_volume(dir / "v.pdv");
  EXPECT_EQ(l.volume.dims(), p.volume.dims());
  EXPECT_EQ(l.volume.spacing(), p.volume.spacing());
  EXPECT_EQ(std::memcmp(l.volume.data().data(), p.volume.data().data(), p.volume.size() * sizeof(float)), 0);
  ASSERT_TRUE(l.sidecar.has_value());
  EXPECT_EQ(l.sidecar->truth.label, 1);
  EXPECT_DOUBLE_EQ(l.sidecar->truth.plane.eta, p.truth.plane.eta);
  EXPECT_EQ(l.sidecar->label_names, default_label_names(3));
  EXPECT_EQ(l.sidecar->seed, 9u);
}

TEST(VolumeIo, HeaderLayout) {
  testing::TempDir dir("vio");
  save_volume(dir / "v.pdv", Volume::filled({8, 9, 10}, {1.0, 2.0, 3.0}, 0.5f));
  const std::string bytes = testing::read_file(dir / "v.pdv");
  ASSERT_EQ(bytes.size(), kVolumeHeaderBytes + 8 * 9 * 10 * sizeof(float));
  EXPECT_EQ(bytes.substr(0, 4), "PDVF");
  std::uint32_t ny = 0;
  float sz = 0.0f;
  std::memcpy(&ny, bytes.data() + 12, 4);
  std::memcpy(&sz, bytes.data() + 28, 4);
  EXPECT_EQ(ny, 9u);
  EXPECT_EQ(sz, 3.0f);
}

TEST(VolumeIo, MissingSidecar) {
  testing::TempDir dir("vio");
  save_volume(dir / "v.pdv", Volume::filled({8, 8, 8}, {1, 1, 1}, 0.25f));
  const LoadedVolume l = load_volume(dir / "v.pdv");
  EXPECT_FALSE(l.sidecar.has_value());
  EXPECT_FLOAT_EQ(l.volume.at(3, 3, 3), 0.25f);
}

TEST(VolumeIo, TruncatedPayload) {
  testing::TempDir dir("vio");
  std::string bytes(kVolumeHeaderBytes, '\0');
  std::memcpy(bytes.data(), "PDVF", 4);
  const std::uint32_t header[4] = {kVolumeFormatVersion, 4, 4, 4};
  std::memcpy(bytes.data() + 4, header, sizeof header);
  const float spacing[3] = {1, 1, 1};
  std::memcpy(bytes.data() + 20, spacing, sizeof spacing);
  bytes.append(63 * sizeof(float), '\0');
  std::ofstream(dir / "t.pdv", std::ios::binary) << bytes;
  EXPECT_THROW(load_volume(dir / "t.pdv"), FormatError);
}

TEST(VolumeIo, BadMagicAndShortHeader) {
  testing::TempDir dir("vio");
  std::ofstream(dir / "a.pdv", std::ios::binary) << "PDV";
  EXPECT_THROW(load_volume(dir / "a.pdv"), FormatError);
  std::string bytes(kVolumeHeaderBytes + 4, '\0');
  std::memcpy(bytes.data(), "XXXX", 4);
  std::ofstream(dir / "b.pdv", std::ios::binary) << bytes;
  EXPECT_THROW(load_volume(dir / "b.pdv"), FormatError);
}

}  // namespace
}  // namespace sploc
