#include <gtest/gtest.h>

#include <cmath>

#include "sploc/uncertainty.hpp"
#include "test_util.hpp"

namespace sploc {
namespace {

TEST(UncertaintyScore, Cases) {
  const std::vector<NormalizedParam> same(4, NormalizedParam{0.3, 0.2, -0.1});
  EXPECT_NEAR(uncertainty_score(same), 0.0, 1e-15);
  const std::vector<NormalizedParam> pair{{0.5, 0.0, -1.0}, {0.5, 0.0, 1.0}};
  EXPECT_NEAR(uncertainty_score(pair), 2.0, 1e-15);
  EXPECT_THROW(uncertainty_score(std::vector<NormalizedParam>{{0, 0, 0}}), ValidationError);
}

TEST(UncertaintyScore, QuadraticInSpread) {
  Rng rng(1);
  std::vector<NormalizedParam> a, b;
  for (int k = 0; k < 6; ++k) {
    const NormalizedParam d{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    a.push_back({0.5 + d[0], 0.2, d[2]});
    b.push_back({0.5 + 2 * d[0], 0.2, 2 * d[2]});
  }
  EXPECT_NEAR(uncertainty_score(b), 4.0 * uncertainty_score(a), 1e-12);
}

TEST(UncertaintyScore, EtaWrapsAround) {
  // η = ±0.95 are 0.1 apart across the seam.
  const std::vector<NormalizedParam> ends{{0.4, 0.95, 0.0}, {0.4, -0.95, 0.0}};
  EXPECT_NEAR(uncertainty_score(ends), 2 * 0.05 * 0.05, 1e-12);
}

TEST(CategoryScores, SameSeedForEveryPrompt) {
  std::vector<std::uint64_t> seeds;
  const EndpointSampler sampler = [&](const std::string& prompt, int k, std::uint64_t seed) {
    seeds.push_back(seed);
    const double s = prompt == "b" ? 0.01 : 0.2;
    std::vector<NormalizedParam> v;
    for (int i = 0; i < k; ++i) v.push_back({0.5 + s * (i % 2), 0.0, 0.0});
    return v;
  };
  const std::vector<std::string> prompts{"a", "b", "c"};
  const auto scores = category_scores(sampler, prompts, 4, 99);
  EXPECT_EQ(seeds, (std::vector<std::uint64_t>{99, 99, 99}));
  EXPECT_EQ(coarse_classify(scores), 1);
  EXPECT_THROW(category_scores(sampler, prompts, 1, 99), ValidationError);
}

TEST(Coarse, ArgminWithTies) {
  EXPECT_EQ(coarse_classify(std::vector<double>{0.3, 0.1, 0.2}), 1);
  EXPECT_EQ(coarse_classify(std::vector<double>{0.2, 0.1, 0.1}), 1);
  EXPECT_THROW(coarse_classify(std::vector<double>{}), ValidationError);
}

TEST(Normalize, Cases) {
  const auto p = normalize_uncertainty(std::vector<double>{1.0, 3.0});
  EXPECT_NEAR(p[0], 0.25, 1e-8);
  EXPECT_NEAR(p[1], 0.75, 1e-8);
  const auto z = normalize_uncertainty(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : z) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(normalize_uncertainty(std::vector<double>{-1.0, 1.0}), ValidationError);
}

TEST(Normalize, ScaleInvariant) {
  const std::vector<double> s{0.4, 1.1, 2.5};
  std::vector<double> t = s;
  for (auto& x : t) x *= 1000.0;
  const auto a = normalize_uncertainty(s), b = normalize_uncertainty(t);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-8);
}

TEST(Adjust, Cases) {
  const std::vector<double> p_o{0.2, 0.5, 0.3};
  const std::vector<double> uniform(3, 1.0 / 3.0);
  const auto same = adjust_probability(p_o, uniform);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(same[i], p_o[i], 1e-15);

  const auto two = adjust_probability(std::vector<double>{0.5, 0.5}, std::vector<double>{0.2, 0.8});
  EXPECT_NEAR(two[0], 0.8, 1e-15);
  EXPECT_NEAR(two[1], 0.2, 1e-15);

  const auto hot = adjust_probability(std::vector<double>{0.0, 1.0, 0.0}, std::vector<double>{0.1, 0.8, 0.1});
  EXPECT_EQ(hot, (std::vector<double>{0.0, 1.0, 0.0}));

  const auto zero_u = adjust_probability(std::vector<double>{0.5, 0.5}, std::vector<double>{0.0, 1.0});
  EXPECT_GT(zero_u[0], 0.999);

  EXPECT_THROW(adjust_probability(p_o, std::vector<double>{0.5, 0.5}), ValidationError);
  EXPECT_THROW(adjust_probability(std::vector<double>{0.0, 0.0}, std::vector<double>{0.5, 0.5}), ValidationError);
}

TEST(Adjust, LowerUncertaintyNeverHurts) {
  const std::vector<double> p_o{0.3, 0.4, 0.3};
  double prev = 0.0;
  for (double u0 : {0.6, 0.5, 0.4, 0.3, 0.2, 0.1}) {
    const double rest = (1.0 - u0) / 2.0;
    const double pa = adjust_probability(p_o, std::vector<double>{u0, rest, rest})[0];
    EXPECT_GT(pa, prev);
    prev = pa;
  }
}

TEST(Decision, ArgmaxWithTies) {
  EXPECT_EQ(final_decision(std::vector<double>{0.2, 0.5, 0.3}), 1);
  EXPECT_EQ(final_decision(std::vector<double>{0.4, 0.4, 0.2}), 0);
}

TEST(Combine, Fields) {
  const ClassProbabilities r =
      combine_probabilities({"a", "b", "c"}, {0.9, 0.1, 0.5}, {0.5, 0.3, 0.2});
  EXPECT_EQ(r.coarse, 1);
  EXPECT_EQ(r.original, 0);
  double sum = 0.0;
  for (double v : r.p_a) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(r.final_label, final_decision(r.p_a));
  EXPECT_THROW(combine_probabilities({"a"}, {0.1, 0.2}, {0.5, 0.5}), ValidationError);
}

}  // namespace
}  // namespace sploc
