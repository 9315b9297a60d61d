#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "grad_cases.hpp"
#include "sploc/summarizer.hpp"
#include "test_util.hpp"

namespace sploc {
namespace {

EpisodeInput random_episode(Rng& rng, std::size_t steps, std::size_t dim, int label) {
  EpisodeInput e;
  e.steps = testing::rand_matrix(rng, steps, dim);
  e.final_feature = testing::rand_vec(rng, dim);
  e.volume_feature = testing::rand_vec(rng, dim);
  e.label = label;
  return e;
}

TEST(Agent, ProbabilitiesInRangeAndSequenceAware) {
  Rng rng(1);
  nn::ParamStore store;
  SelectionAgent agent(store, "agent", 6, 5, nn::CellType::kGru);
  agent.init_uniform(rng);
  nn::Matrix x = testing::rand_matrix(rng, 8, 6);
  const auto p = agent.select_probs(x, nullptr);
  ASSERT_EQ(p.size(), 8u);
  for (double v : p) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  // Changing the last step moves the first step's probability.
  for (std::size_t j = 0; j < 6; ++j) x(7, j) += 0.5;
  EXPECT_NE(agent.select_probs(x, nullptr)[0], p[0]);
  EXPECT_THROW(agent.select_probs(nn::Matrix(0, 6), nullptr), ValidationError);
}

TEST(Sampling, Bernoulli) {
  const std::vector<double> ones(5, 1.0), zeros(5, 0.0), mid(10, 0.3);
  EXPECT_EQ(sample_actions(ones, 1), std::vector<int>(5, 1));
  EXPECT_EQ(sample_actions(zeros, 1), std::vector<int>(5, 0));
  Rng rng(4);
  double sum = 0.0;
  for (int n = 0; n < 1000; ++n)
    for (int a : sample_actions(mid, rng)) sum += a;
  // 10k draws: SE = sqrt(0.21 / 10000) ≈ 0.0046.
  EXPECT_NEAR(sum / 10000.0, 0.3, 0.02);
  EXPECT_EQ(sample_actions(mid, 77), sample_actions(mid, 77));
}

TEST(Summary, AlwaysKeepsFinalPlane) {
  EpisodeInput e;
  e.steps = nn::Matrix(3, 2);
  e.steps.data = {0, 0, 5, -1, 0, 0};
  e.final_feature = {1, 0};
  const SliceSummary none = build_summary(e, std::vector<int>{0, 0, 0});
  EXPECT_EQ(none.indices, (std::vector<int>{3}));
  EXPECT_EQ(none.final_index, 3);
  EXPECT_EQ(none.fused, (std::vector<double>{1, 0}));
  const SliceSummary some = build_summary(e, std::vector<int>{0, 1, 0});
  EXPECT_EQ(some.indices, (std::vector<int>{1, 3}));
  EXPECT_EQ(some.fused, (std::vector<double>{5, 0}));
  EXPECT_THROW(build_summary(e, std::vector<int>{1, 0}), ValidationError);
}

TEST(Summary, ElementwiseMax) {
  EpisodeInput e;
  e.steps = nn::Matrix(2, 2);
  e.steps.data = {1, 0, 0, 2};
  e.final_feature = {-1, -1};
  EXPECT_EQ(build_summary(e, std::vector<int>{1, 1}).fused, (std::vector<double>{1, 2}));
}

TEST(Reward, Components) {
  EpisodeInput e;
  e.steps = nn::Matrix(8, 2);
  for (std::size_t t = 0; t < 8; ++t) {
    e.steps(t, 0) = 1.0;
    e.steps(t, 1) = 1.0;
  }
  e.final_feature = {2.0, 2.0};
  e.volume_feature = {0.0, 0.0};
  e.label = 1;
  nn::ParamStore store;
  FusionClassifier flm(store, "flm", 2, true, 3);
  flm.init_zero();
  RewardConfig cfg;
  cfg.alpha = 1.0;
  cfg.gamma = 1.0;
  cfg.s_max = 5;

  const SliceSummary s5 = build_summary(e, std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0});
  const RewardBreakdown r5 = reward(e, s5, flm, cfg);
  EXPECT_NEAR(r5.r_sim, -1.0, 1e-12);
  EXPECT_NEAR(r5.r_cls, std::log(1.0 / 3.0 + 1e-12), 1e-12);
  EXPECT_EQ(r5.r_penalty, 0.0);
  EXPECT_NEAR(r5.total, r5.r_sim + r5.r_cls - r5.r_penalty, 1e-15);

  const SliceSummary s7 = build_summary(e, std::vector<int>{1, 1, 1, 1, 1, 1, 0, 0});
  EXPECT_NEAR(reward(e, s7, flm, cfg).r_penalty, std::exp(2.0) - 1.0, 1e-12);

  const SliceSummary s1 = build_summary(e, std::vector<int>(8, 0));
  EXPECT_EQ(reward(e, s1, flm, cfg).r_sim, 0.0);
}

TEST(Reward, PairwiseCosineOracle) {
  Rng rng(6);
  const EpisodeInput e = random_episode(rng, 5, 4, 0);
  const SliceSummary s = build_summary(e, std::vector<int>{1, 0, 1, 1, 0});
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < s.indices.size(); ++i)
    for (std::size_t j = i + 1; j < s.indices.size(); ++j) {
      const auto a = summary_feature(e, s.indices[i]), b = summary_feature(e, s.indices[j]);
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
      }
      total += ab / std::sqrt(aa * bb);
      ++pairs;
    }
  EXPECT_NEAR(mean_pairwise_cosine(e, s), total / pairs, 1e-12);
}

TEST(Flm, ZeroInitIsUniform) {
  nn::ParamStore store;
  FusionClassifier flm(store, "flm", 4, true, 3);
  flm.init_zero();
  Rng rng(2);
  const auto p = flm.forward(testing::rand_vec(rng, 4), testing::rand_vec(rng, 4));
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  FusionClassifier flat(store, "flat", 4, false, 3);
  EXPECT_EQ(flat.input(testing::rand_vec(rng, 4), {}).size(), 4u);
}

TEST(PolicyGradient, ZeroAdvantageGivesZero) {
  const std::vector<double> probs{0.2, 0.7, 0.5};
  const std::vector<std::vector<int>> actions{{1, 0, 1}, {0, 1, 1}};
  const std::vector<double> rewards{0.4, 0.4};
  for (double g : policy_logit_gradient(probs, actions, rewards, 0.4)) EXPECT_EQ(g, 0.0);
}

TEST(PolicyGradient, SingleEpisodeSign) {
  const std::vector<double> probs{0.5, 0.5};
  const std::vector<std::vector<int>> actions{{1, 0}};
  // Rewarded: descending the returned gradient raises p for the taken action.
  const auto g = policy_logit_gradient(probs, actions, std::vector<double>{1.0}, 0.0);
  EXPECT_NEAR(g[0], -0.5, 1e-15);
  EXPECT_NEAR(g[1], 0.5, 1e-15);
  const auto h = policy_logit_gradient(probs, actions, std::vector<double>{-1.0}, 0.0);
  EXPECT_GT(h[0], 0.0);
}

TEST(PolicyGradient, MatchesLogLikelihoodOracle) {
  // ∂/∂logit_t log π(a) = a_t − p_t, so −J gradient is −mean (R−b)(a−p).
  Rng rng(3);
  std::vector<double> probs(4);
  for (auto& p : probs) p = rng.uniform(0.1, 0.9);
  std::vector<std::vector<int>> actions;
  std::vector<double> rewards;
  for (int n = 0; n < 6; ++n) {
    actions.push_back(sample_actions(probs, rng));
    rewards.push_back(rng.uniform(-2, 1));
  }
  const auto g = policy_logit_gradient(probs, actions, rewards, -0.3);
  for (std::size_t t = 0; t < 4; ++t) {
    auto logp = [&](double shift) {
      double total = 0.0;
      for (int n = 0; n < 6; ++n) {
        const double z = std::log(probs[t] / (1 - probs[t])) + shift;
        const double p = 1.0 / (1.0 + std::exp(-z));
        total += (rewards[n] + 0.3) * (actions[n][t] ? std::log(p) : std::log(1 - p));
      }
      return -total / 6.0;
    };
    EXPECT_NEAR(g[t], (logp(1e-6) - logp(-1e-6)) / 2e-6, 1e-7);
  }
}

TEST(Phases, Boundaries) {
  EXPECT_EQ(phase_at(1, 1000), TrainPhase::kFlm);
  EXPECT_EQ(phase_at(1000, 1000), TrainPhase::kFlm);
  EXPECT_EQ(phase_at(1001, 1000), TrainPhase::kAgent);
  EXPECT_EQ(phase_at(2000, 1000), TrainPhase::kAgent);
  EXPECT_EQ(phase_at(2001, 1000), TrainPhase::kFlm);
  EXPECT_THROW(phase_at(1, 0), ValidationError);
}

std::vector<EpisodeInput> small_cases(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EpisodeInput> v;
  for (int i = 0; i < n; ++i) v.push_back(random_episode(rng, 6, 8, i % 3));
  return v;
}

SummarizerConfig small_config() {
  SummarizerConfig c;
  c.feature_dim = 8;
  c.hidden = 4;
  c.classes = 3;
  c.init_seed = 2;
  return c;
}

TEST(AlternatingTrain, FlmFrozenDuringAgentPhases) {
  const auto cases = small_cases(6, 9);
  SummarizerModel m(small_config());
  SummarizerTrainConfig cfg;
  cfg.iterations = 8;
  cfg.phase_length = 2;
  cfg.validate_every = 0;
  cfg.reinforce.episodes = 4;
  std::map<long, std::pair<std::uint64_t, std::uint64_t>> hashes;
  const SummarizerTrainLog log = alternating_train(m, cases, {}, cfg, 1, [&](long it, TrainPhase, double) {
    hashes[it] = {m.flm_params().hash(), m.agent_params().hash()};
  });
  ASSERT_EQ(log.phases.size(), 8u);
  const std::vector<TrainPhase> want{TrainPhase::kFlm,   TrainPhase::kFlm,   TrainPhase::kAgent, TrainPhase::kAgent,
                                     TrainPhase::kFlm,   TrainPhase::kFlm,   TrainPhase::kAgent, TrainPhase::kAgent};
  EXPECT_EQ(log.phases, want);
  for (long it = 2; it <= 8; ++it) {
    if (want[it - 1] == TrainPhase::kAgent) {
      EXPECT_EQ(hashes[it].first, hashes[it - 1].first) << it;
      EXPECT_NE(hashes[it].second, hashes[it - 1].second) << it;
    } else {
      EXPECT_EQ(hashes[it].second, hashes[it - 1].second) << it;
    }
  }
}

TEST(AlternatingTrain, FixedModesSkipAgent) {
  const auto cases = small_cases(6, 10);
  SummarizerConfig c = small_config();
  c.mode = SelectionMode::kFinalOnly;
  SummarizerModel m(c);
  const auto agent_hash = m.agent_params().hash();
  SummarizerTrainConfig cfg;
  cfg.iterations = 6;
  cfg.phase_length = 2;
  cfg.validate_every = 0;
  const auto log = alternating_train(m, cases, {}, cfg, 1);
  for (auto p : log.phases) EXPECT_EQ(p, TrainPhase::kFlm);
  EXPECT_EQ(m.agent_params().hash(), agent_hash);
  EXPECT_EQ(m.summarize(cases[0]).indices, (std::vector<int>{6}));
  c.mode = SelectionMode::kAllPlanes;
  SummarizerModel all(c);
  EXPECT_EQ(all.summarize(cases[0]).indices.size(), 7u);
}

TEST(AlternatingTrain, Reproducible) {
  const auto cases = small_cases(6, 11);
  SummarizerTrainConfig cfg;
  cfg.iterations = 6;
  cfg.phase_length = 2;
  cfg.validate_every = 3;
  cfg.reinforce.episodes = 4;
  SummarizerModel a(small_config()), b(small_config());
  alternating_train(a, cases, cases, cfg, 5);
  alternating_train(b, cases, cases, cfg, 5);
  EXPECT_EQ(a.agent_params().hash(), b.agent_params().hash());
  EXPECT_EQ(a.flm_params().hash(), b.flm_params().hash());
}

TEST(Summarizer, SaveLoadRoundTrip) {
  testing::TempDir dir("summ");
  const auto cases = small_cases(3, 12);
  SummarizerConfig c = small_config();
  c.cell = nn::CellType::kLstm;
  c.use_volume = false;
  SummarizerModel m(c);
  m.save(dir / "a.ckpt", dir / "f.ckpt");
  const auto loaded = SummarizerModel::load(dir / "a.ckpt", dir / "f.ckpt");
  EXPECT_EQ(loaded->config().cell, nn::CellType::kLstm);
  EXPECT_FALSE(loaded->config().use_volume);
  EXPECT_EQ(loaded->probabilities(cases[1]), m.probabilities(cases[1]));
  EXPECT_EQ(loaded->classify(cases[1]), m.classify(cases[1]));
}

TEST(Summarizer, DeterministicThreshold) {
  const auto cases = small_cases(1, 13);
  SummarizerModel m(small_config());
  const auto p = m.probabilities(cases[0]);
  const SliceSummary s = m.summarize(cases[0]);
  std::vector<int> want;
  for (std::size_t t = 0; t < p.size(); ++t)
    if (p[t] >= 0.5) want.push_back(static_cast<int>(t));
  want.push_back(static_cast<int>(p.size()));
  EXPECT_EQ(s.indices, want);
}

TEST(Summarizer, GradientChecks) {
  for (const auto& r : {testing::check_agent(nn::CellType::kGru), testing::check_flm(true)}) {
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst_param;
  }
}

}  // namespace
}  // namespace sploc
