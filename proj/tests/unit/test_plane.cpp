#include <gtest/gtest.h>

#include <cmath>

#include "sploc/metrics.hpp"
#include "sploc/phantom.hpp"
#include "sploc/plane.hpp"
#include "sploc/slice.hpp"
#include "test_util.hpp"

namespace sploc {
namespace {

PlaneParam random_canonical(Rng& rng, double r_max) {
  return {rng.uniform(-r_max, r_max), rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kPi)};
}

TEST(ToCartesian, AxisCases) {
  CartesianPlane c = to_cartesian({10.0, 0.0, 0.0});
  EXPECT_NEAR(c.normal[2], 1.0, 1e-15);
  EXPECT_NEAR(c.point[2], 10.0, 1e-15);
  EXPECT_NEAR(c.point[0], 0.0, 1e-15);

  c = to_cartesian({0.0, 0.0, kPi / 2});
  EXPECT_NEAR(c.normal[0], 1.0, 1e-15);
  EXPECT_NEAR(c.normal[2], 0.0, 1e-15);
  EXPECT_NEAR(norm(c.point), 0.0, 1e-15);

  c = to_cartesian({5.0, kPi / 2, kPi / 2});
  EXPECT_NEAR(c.normal[1], 1.0, 1e-15);
  EXPECT_NEAR(c.point[1], 5.0, 1e-14);
  EXPECT_NEAR(c.point[0], 0.0, 1e-14);
}

TEST(ToCartesian, PlaneFromNormalInverts) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const PlaneParam p = random_canonical(rng, 40.0);
    const CartesianPlane c = to_cartesian(p);
    const PlaneParam q = plane_from_normal(3.0 * c.normal, p.r);
    const CartesianPlane d = to_cartesian(q);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(c.normal[k], d.normal[k], 1e-12);
    EXPECT_DOUBLE_EQ(q.r, p.r);
  }
}

TEST(Canonicalize, KeepsOrientedPlane) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const PlaneParam raw{rng.uniform(-5, 5), rng.uniform(-20, 20), rng.uniform(-20, 20)};
    const PlaneParam c = canonicalize(raw);
    EXPECT_GE(c.eta, 0.0);
    EXPECT_LT(c.eta, kTwoPi);
    EXPECT_GE(c.theta, 0.0);
    EXPECT_LE(c.theta, kPi);
    const Vec3 a = to_cartesian(raw).normal, b = to_cartesian(c).normal;
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(AngleMetric, Cases) {
  const PlaneParam p{3.0, 1.0, 0.7};
  EXPECT_NEAR(angle_metric(p, p), 0.0, 1e-6);
  EXPECT_NEAR(angle_metric({0, 0, kPi / 2}, {0, kPi / 2, kPi / 2}), 90.0, 1e-12);
  const PlaneParam flipped = canonicalize({-3.0, 1.0 + kPi, kPi - 0.7});
  EXPECT_NEAR(angle_metric(p, flipped), 0.0, 1e-6);
}

TEST(AngleMetric, SymmetricAndBounded) {
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const PlaneParam a = random_canonical(rng, 10), b = random_canonical(rng, 10);
    const double ab = angle_metric(a, b);
    EXPECT_DOUBLE_EQ(ab, angle_metric(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 90.0);
  }
}

TEST(DistanceMetric, Cases) {
  EXPECT_EQ(distance_metric({4, 1, 1}, {4, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(distance_metric({3, 0, 0}, {-5, 0, 0}), 2.0);
  EXPECT_DOUBLE_EQ(distance_metric({0, 0, 0}, {7, 1, 2}), 7.0);
}

TEST(NormalizeParam, Midpoints) {
  const NormalizedParam u = normalize_param({0.0, kPi, kPi / 2}, 30.0);
  EXPECT_NEAR(u[0], 0.0, 1e-15);
  EXPECT_NEAR(u[1], 0.0, 1e-15);
  EXPECT_NEAR(u[2], 0.0, 1e-15);
  const NormalizedParam e = normalize_param({30.0, 0.0, 0.0}, 30.0);
  EXPECT_EQ(e[0], 1.0);
  EXPECT_EQ(e[1], -1.0);
  EXPECT_EQ(e[2], -1.0);
}

TEST(NormalizeParam, RoundTrip) {
  Rng rng(8);
  const double r_max = 55.4;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PlaneParam p = random_canonical(rng, r_max);
    const PlaneParam q = denormalize_param(normalize_param(p, r_max), r_max);
    worst = std::max({worst, std::abs(p.r - q.r), std::abs(p.eta - q.eta), std::abs(p.theta - q.theta)});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(NormalizeParam, DenormalizeClampsAndWraps) {
  const PlaneParam p = denormalize_param({3.0, 1.5, -4.0}, 10.0);
  EXPECT_EQ(p.r, 10.0);
  EXPECT_NEAR(p.eta, 0.5 * kPi, 1e-12);
  EXPECT_EQ(p.theta, 0.0);
}

TEST(MeanParam, Cases) {
  const PlaneParam a{2.0, 0.4, 1.0};
  const std::vector<PlaneParam> one{a};
  const PlaneParam m1 = mean_param(one);
  EXPECT_DOUBLE_EQ(m1.r, a.r);
  EXPECT_NEAR(m1.eta, a.eta, 1e-15);
  EXPECT_DOUBLE_EQ(m1.theta, a.theta);

  const std::vector<PlaneParam> wrap{{2.0, 0.1, 1.0}, {4.0, kTwoPi - 0.1, 2.0}};
  const PlaneParam m = mean_param(wrap);
  EXPECT_NEAR(m.eta, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.r, 3.0);
  EXPECT_DOUBLE_EQ(m.theta, 1.5);
  EXPECT_THROW(mean_param(std::vector<PlaneParam>{}), ValidationError);
}

TEST(InPlaneBasis, OrthonormalAndTieBreak) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Vec3 n = to_cartesian(random_canonical(rng, 1)).normal;
    const auto [u, v] = in_plane_basis(n);
    EXPECT_NEAR(norm(u), 1.0, 1e-12);
    EXPECT_NEAR(norm(v), 1.0, 1e-12);
    EXPECT_NEAR(dot(u, v), 0.0, 1e-12);
    EXPECT_NEAR(dot(u, n), 0.0, 1e-12);
  }
  const auto [u, v] = in_plane_basis({0.0, 0.0, 1.0});
  EXPECT_NEAR(u[1], 1.0, 1e-15);  // z × x = y
  EXPECT_NEAR(v[0], -1.0, 1e-15);
}

TEST(Slice, UniformVolume) {
  const Volume v = Volume::filled({16, 16, 16}, {1, 1, 1}, 0.7f);
  const SliceImage s = slice_volume(v, {1.0, 0.3, 1.2}, 12, 8.0);
  ASSERT_EQ(s.pixels.size(), 144u);
  for (double x : s.pixels) EXPECT_NEAR(x, 0.7, 1e-6);
}

TEST(Slice, DeterministicAndSignFlipInvariant) {
  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  spec.scale = 11.0;
  spec.rotation = {0.2, 0.3, -0.1};
  const Phantom p = generate_phantom(spec);
  const PlaneParam a{2.5, 0.8, 1.1};
  const SliceImage s1 = slice_volume(p.volume, a, 24, 30.0);
  const SliceImage s2 = slice_volume(p.volume, a, 24, 30.0);
  EXPECT_EQ(s1.pixels, s2.pixels);
  // (r, n) and (-r, -n) are the same plane; u flips with n and v does not,
  // so the image is mirrored along x.
  const PlaneParam b = canonicalize({-2.5, 0.8 + kPi, kPi - 1.1});
  const SliceImage s3 = slice_volume(p.volume, b, 24, 30.0);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) ASSERT_NEAR(s3.at(x, y), s1.at(23 - x, y), 1e-6);
}

TEST(Slice, TruthPlaneBeatsRotatedPlane) {
  PhantomSpec spec;
  spec.dims = {40, 40, 40};
  spec.scale = 14.0;
  spec.class_label = 1;
  spec.rotation = {0.3, -0.2, 0.5};
  spec.seed = 4;
  const Phantom p = generate_phantom(spec);
  const SliceImage ref = slice_volume(p.volume, p.truth.plane, 40, 40.0);
  const SliceImage same = slice_volume(p.volume, p.truth.plane, 40, 40.0);
  const Vec3 n = to_cartesian(p.truth.plane).normal;
  const auto [u, v] = in_plane_basis(n);
  const Vec3 tilted = std::cos(kPi / 4) * n + std::sin(kPi / 4) * u;
  const SliceImage rot = slice_volume(p.volume, plane_from_normal(tilted, p.truth.plane.r), 40, 40.0);
  EXPECT_GT(ssim(ref, same), ssim(ref, rot));
  EXPECT_NEAR(ssim(ref, same), 1.0, 1e-12);
}

TEST(Slice, WritePgm) {
  testing::TempDir dir("pgm");
  SliceImage s{3, 2, 1.0, {0.0, 0.5, 1.0, 2.0, -1.0, 0.2}};
  write_pgm(s, dir / "s.pgm");
  const std::string bytes = testing::read_file(dir / "s.pgm");
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 1]), 128);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 3]), 255);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 4]), 0);
}

}  // namespace
}  // namespace sploc
