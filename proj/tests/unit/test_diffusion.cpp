#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sploc/diffusion.hpp"
#include "sploc/phantom.hpp"
#include "test_util.hpp"

namespace sploc {
namespace {

PhantomSpec tiny_spec(int label, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 1));
  PhantomSpec s;
  s.class_label = label;
  s.seed = seed;
  s.dims = {16, 16, 16};
  s.scale = 6.0;
  s.rotation = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
  return s;
}

DiffusionModelConfig tiny_config(const Volume& v) {
  DiffusionModelConfig c;
  c.denoiser_hidden = 32;
  c.encoder_hidden = 16;
  c.slice_size = 16;
  c.fov = 16.0;
  c.r_max = v.half_diagonal();
  c.label_names = default_label_names(3);
  c.init_seed = 5;
  return c;
}

struct TinySet {
  std::vector<Phantom> phantoms;
  std::vector<TrainingCase> cases;
};

TinySet tiny_set(int n) {
  TinySet s;
  s.phantoms.reserve(n);
  for (int i = 0; i < n; ++i) s.phantoms.push_back(generate_phantom(tiny_spec(i % 3, 100 + i)));
  for (int i = 0; i < n; ++i) {
    s.cases.push_back(make_training_case(s.phantoms[i].volume, s.phantoms[i].truth.plane, i % 3));
  }
  return s;
}

TEST(Denoiser, DeterministicForward) {
  const TinySet set = tiny_set(1);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  const auto cv = m.encode_volume(set.cases[0].pooled);
  const auto ct = m.catalog().embed(PromptCatalog::inference_prompt());
  const auto a = m.predict(set.phantoms[0].volume, cv, ct, {0.1, 0.2, -0.3}, 500);
  const auto b = m.predict(set.phantoms[0].volume, cv, ct, {0.1, 0.2, -0.3}, 500);
  EXPECT_EQ(a.eps, b.eps);
  EXPECT_EQ(a.plane_feature.size(), kFeatureDim);
  for (double w : {a.weights.v, a.weights.p, a.weights.t}) {
    EXPECT_GT(w, 0.0);
    EXPECT_LT(w, 1.0);
  }
}

TEST(Diffusion, FrozenLossNearNoiseEnergy) {
  const TinySet set = tiny_set(6);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  Rng rng(7);
  double sum = 0.0;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const int t = rng.uniform_int(1, 1000);
    const Vec3 eps = rng.normal3();
    const double loss = m.sample_loss(set.cases[i % 6], t, eps, PromptCatalog::label_free_training_prompt(), 0.0);
    ASSERT_GE(loss, 0.0);
    sum += loss;
  }
  // Freshly initialised outputs are small, so the loss is close to E‖ε‖² = 3.
  EXPECT_NEAR(sum / n, 3.0, 0.3);
}

TEST(Diffusion, TrainingReducesLoss) {
  const TinySet set = tiny_set(20);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  DiffusionTrainConfig cfg;
  cfg.iterations = 2000;
  cfg.validate_every = 0;
  const DiffusionTrainLog log = train_diffusion(m, set.cases, {}, cfg, 3);
  ASSERT_EQ(log.losses.size(), 2000u);
  const double first = std::accumulate(log.losses.begin(), log.losses.begin() + 200, 0.0) / 200;
  const double last = std::accumulate(log.losses.end() - 200, log.losses.end(), 0.0) / 200;
  EXPECT_LT(last, first);
  EXPECT_TRUE(m.trained());
}

TEST(Diffusion, TrainStepRejectsEmptyBatch) {
  const TinySet set = tiny_set(1);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  Rng rng(1);
  EXPECT_THROW(train_step(m, {}, rng, DiffusionTrainConfig{}), ValidationError);
}

TEST(Localize, RequiresTrainedModel) {
  const TinySet set = tiny_set(1);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  EXPECT_THROW(m.localize(set.phantoms[0].volume, LocalizeConfig{}), TrainingError);
}

TEST(Localize, TrajectoryShapeAndDeterminism) {
  const TinySet set = tiny_set(1);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  m.set_trained(true);
  LocalizeConfig lc{3, 42, "", true};
  const LocalizeResult a = m.localize(set.phantoms[0].volume, lc);
  const LocalizeResult b = m.localize(set.phantoms[0].volume, lc);
  ASSERT_EQ(a.chains.size(), 3u);
  for (const auto& c : a.chains) {
    ASSERT_EQ(c.steps.size(), 100u);
    EXPECT_EQ(c.steps.front().t, 991);
    for (std::size_t i = 1; i < c.steps.size(); ++i) EXPECT_LT(c.steps[i].t, c.steps[i - 1].t);
  }
  EXPECT_TRUE(a.chains[0].steps[10].slice.has_value());
  EXPECT_FALSE(a.chains[1].steps[10].slice.has_value());
  EXPECT_EQ(a.plane.r, b.plane.r);
  EXPECT_EQ(a.plane.eta, b.plane.eta);
  EXPECT_EQ(a.chains[2].endpoint, b.chains[2].endpoint);
  std::vector<PlaneParam> ends;
  for (const auto& c : a.chains) ends.push_back(c.endpoint_plane);
  const PlaneParam mean = mean_param(ends);
  EXPECT_EQ(a.plane.r, mean.r);
  EXPECT_EQ(a.final_feature.size(), kFeatureDim);
  EXPECT_EQ(a.volume_feature.size(), kFeatureDim);
}

TEST(Localize, SingleChainFinalIsEndpoint) {
  const TinySet set = tiny_set(1);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  m.set_trained(true);
  const LocalizeResult r = m.localize(set.phantoms[0].volume, LocalizeConfig{1, 9, "", false});
  EXPECT_NEAR(r.plane.r, r.chains[0].endpoint_plane.r, 1e-12);
  EXPECT_NEAR(r.plane.eta, r.chains[0].endpoint_plane.eta, 1e-12);
  EXPECT_NEAR(r.plane.theta, r.chains[0].endpoint_plane.theta, 1e-12);
}

TEST(Localize, EndpointsMatchLocalize) {
  const TinySet set = tiny_set(1);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  m.set_trained(true);
  const std::string prompt = m.catalog().category_prompt(2);
  const LocalizeResult r = m.localize(set.phantoms[0].volume, LocalizeConfig{4, 11, prompt, false});
  const auto ends = m.localize_endpoints(set.phantoms[0].volume, prompt, 4, 11);
  ASSERT_EQ(ends.size(), 4u);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(ends[k], r.chains[k].endpoint);
}

TEST(Diffusion, CheckpointRoundTrip) {
  testing::TempDir dir("diff");
  const TinySet set = tiny_set(3);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  DiffusionTrainConfig cfg;
  cfg.iterations = 20;
  train_diffusion(m, set.cases, {}, cfg, 1);
  m.save(dir / "d.ckpt");
  const auto loaded = DiffusionModel::load(dir / "d.ckpt");
  EXPECT_EQ(loaded->params().hash(), m.params().hash());
  EXPECT_TRUE(loaded->trained());
  EXPECT_EQ(loaded->config().label_names, m.config().label_names);
  const LocalizeConfig lc{2, 5, "", false};
  EXPECT_EQ(loaded->localize(set.phantoms[1].volume, lc).plane.r, m.localize(set.phantoms[1].volume, lc).plane.r);
}

TEST(Diffusion, DescriptorsStayFixedDuringTraining) {
  const TinySet set = tiny_set(3);
  DiffusionModel m(tiny_config(set.phantoms[0].volume));
  m.set_trained(true);
  const LocalizeConfig lc{1, 3, "", false};
  const LocalizeResult before = m.localize(set.phantoms[0].volume, lc);
  DiffusionTrainConfig cfg;
  cfg.iterations = 50;
  cfg.validate_every = 0;
  train_diffusion(m, set.cases, {}, cfg, 2);
  EXPECT_EQ(m.describe_volume(set.cases[0].pooled), before.volume_feature);
  EXPECT_NE(m.encode_volume(set.cases[0].pooled), before.volume_feature);
  const LocalizeResult after = m.localize(set.phantoms[0].volume, lc);
  const TrajectoryStep& s = after.chains[0].steps[5];
  SliceImage img;
  m.encode_plane(set.phantoms[0].volume, s.plane, &img);
  EXPECT_EQ(s.feature, m.describe_slice(img));
}

TEST(Diffusion, TrainedFeaturesWhenDescriptorsDisabled) {
  const TinySet set = tiny_set(1);
  DiffusionModelConfig c = tiny_config(set.phantoms[0].volume);
  c.frozen_descriptors = false;
  DiffusionModel m(c);
  m.set_trained(true);
  const LocalizeResult r = m.localize(set.phantoms[0].volume, LocalizeConfig{1, 3, "", false});
  EXPECT_EQ(r.volume_feature, m.encode_volume(set.cases[0].pooled));
  const TrajectoryStep& s = r.chains[0].steps[7];
  EXPECT_EQ(s.feature, m.encode_plane(set.phantoms[0].volume, s.plane, nullptr));
  EXPECT_EQ(r.final_feature, m.encode_plane(set.phantoms[0].volume, r.plane, nullptr));
}

TEST(Diffusion, TrainingIsReproducible) {
  const TinySet set = tiny_set(4);
  DiffusionTrainConfig cfg;
  cfg.iterations = 30;
  cfg.validate_every = 10;
  DiffusionModel a(tiny_config(set.phantoms[0].volume)), b(tiny_config(set.phantoms[0].volume));
  train_diffusion(a, set.cases, set.cases, cfg, 8);
  train_diffusion(b, set.cases, set.cases, cfg, 8);
  EXPECT_EQ(a.params().hash(), b.params().hash());
}

}  // namespace
}  // namespace sploc
