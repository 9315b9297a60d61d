#include "sploc/summarizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sploc/nn/checkpoint.hpp"

namespace sploc {

std::span<const double> summary_feature(const EpisodeInput& input, int index) {
  const int T = static_cast<int>(input.steps.rows);
  if (index == T) return input.final_feature;
  if (index < 0 || index > T) throw ValidationError("summary index out of range");
  return input.steps.row(static_cast<std::size_t>(index));
}

// ---------------------------------------------------------------- Agent

SelectionAgent::SelectionAgent(nn::ParamStore& store, const std::string& name, std::size_t input,
                               std::size_t hidden, nn::CellType cell)
    : rnn_(store, name + ".rnn", input, hidden, cell), head_(store, name + ".head", 2 * hidden, 1) {}

void SelectionAgent::init_uniform(Rng& rng, double initial_prob) {
  if (!(initial_prob > 0.0 && initial_prob < 1.0)) throw ValidationError("initial selection probability must lie in (0, 1)");
  rnn_.init_uniform(rng);
  head_.init_uniform(rng, 1.0);
  head_.bias().value[0] = std::log(initial_prob / (1.0 - initial_prob));
}

std::vector<double> SelectionAgent::select_probs(const nn::Matrix& features, Cache* cache) const {
  if (features.rows == 0) throw ValidationError("select_probs: empty trajectory");
  nn::BiRecurrent::Cache local;
  nn::Matrix enc = rnn_.forward(features, cache ? &cache->rnn : &local);
  std::vector<double> probs(features.rows);
  double logit = 0.0;
  for (std::size_t t = 0; t < features.rows; ++t) {
    head_.forward(enc.row(t), std::span<double>(&logit, 1));
    probs[t] = nn::sigmoid(logit);
  }
  if (cache) {
    cache->encoded = std::move(enc);
    cache->probs = probs;
  }
  return probs;
}

void SelectionAgent::backward(const Cache& cache, std::span<const double> dlogits) {
  nn::Matrix denc(cache.encoded.rows, cache.encoded.cols);
  for (std::size_t t = 0; t < cache.encoded.rows; ++t) {
    head_.backward(cache.encoded.row(t), dlogits.subspan(t, 1), denc.row(t));
  }
  rnn_.backward(cache.rnn, denc);
}

std::vector<int> sample_actions(std::span<const double> probs, Rng& rng) {
  std::vector<int> a(probs.size());
  for (std::size_t t = 0; t < probs.size(); ++t) a[t] = rng.bernoulli(probs[t]) ? 1 : 0;
  return a;
}

std::vector<int> sample_actions(std::span<const double> probs, std::uint64_t seed) {
  Rng rng(seed);
  return sample_actions(probs, rng);
}

SliceSummary build_summary(const EpisodeInput& input, std::span<const int> actions) {
  const int T = static_cast<int>(input.steps.rows);
  if (static_cast<int>(actions.size()) != T) throw ValidationError("build_summary: one action per step required");
  SliceSummary s;
  s.final_index = T;
  for (int t = 0; t < T; ++t) {
    if (actions[t]) s.indices.push_back(t);
  }
  s.indices.push_back(T);
  s.fused.assign(input.final_feature.begin(), input.final_feature.end());
  for (int idx : s.indices) {
    const auto f = summary_feature(input, idx);
    if (f.size() != s.fused.size()) throw ValidationError("build_summary: feature size mismatch");
    for (std::size_t i = 0; i < f.size(); ++i) s.fused[i] = std::max(s.fused[i], f[i]);
  }
  return s;
}

// ---------------------------------------------------------------- FLM

FusionClassifier::FusionClassifier(nn::ParamStore& store, const std::string& name, std::size_t feature_dim,
                                   bool use_volume, int classes)
    : dense_(store, name + ".dense", use_volume ? 2 * feature_dim : feature_dim, static_cast<std::size_t>(classes)),
      feature_dim_(feature_dim),
      use_volume_(use_volume),
      classes_(classes) {
  if (classes < 2) throw ValidationError("FLM needs at least two classes");
}

void FusionClassifier::init_uniform(Rng& rng) { dense_.init_uniform(rng, 1.0); }
void FusionClassifier::init_zero() { dense_.init_zero(); }

std::vector<double> FusionClassifier::input(std::span<const double> fused,
                                            std::span<const double> volume_feature) const {
  if (fused.size() != feature_dim_) throw ValidationError("FLM: fused feature has the wrong size");
  if (!use_volume_) return {fused.begin(), fused.end()};
  if (volume_feature.size() != feature_dim_) throw ValidationError("FLM: volume feature has the wrong size");
  return nn::concat({fused, volume_feature});
}

std::vector<double> FusionClassifier::forward(std::span<const double> fused,
                                              std::span<const double> volume_feature) const {
  return nn::softmax(dense_.forward(input(fused, volume_feature)));
}

double FusionClassifier::backward_cross_entropy(std::span<const double> fused, std::span<const double> volume_feature,
                                                int label, double scale) {
  const std::vector<double> x = input(fused, volume_feature);
  nn::CrossEntropy ce = nn::softmax_cross_entropy(dense_.forward(x), label);
  for (double& d : ce.dlogits) d *= scale;
  dense_.backward(x, ce.dlogits, {});
  return ce.loss;
}

// ---------------------------------------------------------------- Reward

double mean_pairwise_cosine(const EpisodeInput& input, const SliceSummary& summary) {
  const std::size_t n = summary.indices.size();
  if (n < 2) return 0.0;
  std::vector<std::span<const double>> f;
  std::vector<double> norms;
  for (int idx : summary.indices) {
    f.push_back(summary_feature(input, idx));
    double s = 0.0;
    for (double x : f.back()) s += x * x;
    norms.push_back(std::sqrt(s));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < f[i].size(); ++k) d += f[i][k] * f[j][k];
      const double denom = norms[i] * norms[j];
      total += denom > 0.0 ? d / denom : 0.0;
    }
  }
  return total / static_cast<double>(n * (n - 1) / 2);
}

RewardBreakdown reward(const EpisodeInput& input, const SliceSummary& summary, const FusionClassifier& flm,
                       const RewardConfig& cfg) {
  if (summary.indices.empty()) throw ValidationError("reward: empty summary");
  RewardBreakdown r;
  const double sim = mean_pairwise_cosine(input, summary);
  r.r_sim = cfg.literal_rsim ? sim : -sim;
  const std::vector<double> probs = flm.forward(summary.fused, input.volume_feature);
  r.r_cls = std::log(probs.at(static_cast<std::size_t>(input.label)) + 1e-12);
  const double excess = static_cast<double>(summary.indices.size()) - cfg.s_max;
  if (cfg.literal_penalty) {
    r.r_penalty = cfg.alpha * std::max(0.0, std::exp(cfg.gamma * excess));
  } else if (excess > 0) {
    r.r_penalty = cfg.alpha * (std::exp(cfg.gamma * excess) - 1.0);
  }
  r.total = r.r_sim + r.r_cls - r.r_penalty;
  return r;
}

// ---------------------------------------------------------------- REINFORCE

void ReinforceConfig::validate() const {
  if (episodes < 1) throw ValidationError("REINFORCE needs at least one episode per update");
  if (!(learning_rate > 0.0)) throw ValidationError("REINFORCE learning rate must be positive");
  if (l2 < 0.0) throw ValidationError("REINFORCE l2 must be non-negative");
  if (baseline_decay < 0.0 || baseline_decay > 1.0) throw ValidationError("baseline decay must lie in [0, 1]");
}

std::vector<double> policy_logit_gradient(std::span<const double> probs, const std::vector<std::vector<int>>& actions,
                                          std::span<const double> rewards, double baseline) {
  if (actions.empty()) throw ValidationError("policy gradient needs at least one episode");
  if (actions.size() != rewards.size()) throw ValidationError("one reward per episode required");
  std::vector<double> g(probs.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(actions.size());
  for (std::size_t n = 0; n < actions.size(); ++n) {
    const double adv = rewards[n] - baseline;
    for (std::size_t t = 0; t < probs.size(); ++t) g[t] -= inv * adv * (actions[n][t] - probs[t]);
  }
  return g;
}

UpdateStats reinforce_update(SummarizerModel& model, const EpisodeInput& input, const RewardConfig& reward_cfg,
                             const ReinforceConfig& cfg, ReinforceState& state, Rng& rng) {
  cfg.validate();
  SelectionAgent::Cache cache;
  const std::vector<double> probs = model.agent().select_probs(input.steps, &cache);
  std::vector<std::vector<int>> actions(cfg.episodes);
  std::vector<double> rewards(cfg.episodes);
  UpdateStats stats;
  for (int n = 0; n < cfg.episodes; ++n) {
    actions[n] = sample_actions(probs, rng);
    const SliceSummary s = build_summary(input, actions[n]);
    rewards[n] = reward(input, s, model.flm(), reward_cfg).total;
    stats.mean_reward += rewards[n];
    stats.mean_size += static_cast<double>(s.indices.size());
  }
  stats.mean_reward /= cfg.episodes;
  stats.mean_size /= cfg.episodes;
  if (!state.initialized) {
    state.baseline = stats.mean_reward;
    state.initialized = true;
  }
  const std::vector<double> g = policy_logit_gradient(probs, actions, rewards, state.baseline);
  model.agent().backward(cache, g);
  if (cfg.plain_sgd) {
    nn::sgd_l2_step(model.agent_params(), cfg.learning_rate, cfg.l2);
  } else {
    nn::TrainConfig opt;
    opt.learning_rate = cfg.learning_rate;
    opt.weight_decay = cfg.l2;
    nn::adamw_step(model.agent_params(), opt);
  }
  state.baseline = cfg.baseline_decay * state.baseline + (1.0 - cfg.baseline_decay) * stats.mean_reward;
  if (!std::isfinite(state.baseline)) throw TrainingError("REINFORCE baseline became non-finite");
  state.episodes += cfg.episodes;
  stats.probs = probs;
  return stats;
}

// ---------------------------------------------------------------- Model

SelectionMode parse_selection_mode(const std::string& s) {
  if (s == "agent") return SelectionMode::kAgent;
  if (s == "final") return SelectionMode::kFinalOnly;
  if (s == "all") return SelectionMode::kAllPlanes;
  throw ValidationError("unknown selection mode '" + s + "' (expected agent, final or all)");
}

std::string to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::kAgent: return "agent";
    case SelectionMode::kFinalOnly: return "final";
    case SelectionMode::kAllPlanes: return "all";
  }
  return "agent";
}

SummarizerModel::SummarizerModel(SummarizerConfig cfg) : cfg_(cfg) {
  if (cfg_.feature_dim == 0 || cfg_.hidden == 0) throw ValidationError("summarizer sizes must be positive");
  agent_ = SelectionAgent(agent_store_, "agent", cfg_.feature_dim, cfg_.hidden, cfg_.cell);
  flm_ = FusionClassifier(flm_store_, "flm", cfg_.feature_dim, cfg_.use_volume, cfg_.classes);
  Rng rng(mix_seed(cfg_.init_seed, 404));
  agent_.init_uniform(rng, cfg_.initial_prob);
  flm_.init_zero();
}

std::vector<double> SummarizerModel::probabilities(const EpisodeInput& input) const {
  if (cfg_.mode != SelectionMode::kAgent) return {};
  return agent_.select_probs(input.steps, nullptr);
}

SliceSummary SummarizerModel::summarize(const EpisodeInput& input) const {
  std::vector<int> actions(input.steps.rows, cfg_.mode == SelectionMode::kAllPlanes ? 1 : 0);
  if (cfg_.mode == SelectionMode::kAgent) {
    const std::vector<double> probs = probabilities(input);
    for (std::size_t t = 0; t < probs.size(); ++t) actions[t] = probs[t] >= 0.5 ? 1 : 0;
  }
  return build_summary(input, actions);
}

std::vector<double> SummarizerModel::classify(const EpisodeInput& input) const {
  return flm_.forward(summarize(input).fused, input.volume_feature);
}

namespace {
nlohmann::json config_meta(const SummarizerConfig& cfg, const std::string& kind) {
  nlohmann::json m;
  m["kind"] = kind;
  m["feature_dim"] = cfg.feature_dim;
  m["hidden"] = cfg.hidden;
  m["cell"] = nn::to_string(cfg.cell);
  m["classes"] = cfg.classes;
  m["use_volume"] = cfg.use_volume;
  m["mode"] = to_string(cfg.mode);
  m["init_seed"] = cfg.init_seed;
  m["initial_prob"] = cfg.initial_prob;
  return m;
}

SummarizerConfig config_from_meta(const nlohmann::json& m) {
  SummarizerConfig cfg;
  cfg.feature_dim = m.at("feature_dim");
  cfg.hidden = m.at("hidden");
  cfg.cell = nn::parse_cell_type(m.at("cell"));
  cfg.classes = m.at("classes");
  cfg.use_volume = m.at("use_volume");
  cfg.mode = parse_selection_mode(m.at("mode"));
  cfg.init_seed = m.at("init_seed");
  cfg.initial_prob = m.value("initial_prob", cfg.initial_prob);
  return cfg;
}
}  // namespace

void SummarizerModel::save(const std::filesystem::path& agent_path, const std::filesystem::path& flm_path) const {
  nn::save_checkpoint(agent_path, agent_store_, config_meta(cfg_, "agent"));
  nn::save_checkpoint(flm_path, flm_store_, config_meta(cfg_, "flm"));
}

std::unique_ptr<SummarizerModel> SummarizerModel::load(const std::filesystem::path& agent_path,
                                                       const std::filesystem::path& flm_path) {
  const nlohmann::json am = nn::read_checkpoint_meta(agent_path);
  const nlohmann::json fm = nn::read_checkpoint_meta(flm_path);
  if (am.value("kind", "") != "agent") throw FormatError(agent_path.string() + " is not an agent checkpoint");
  if (fm.value("kind", "") != "flm") throw FormatError(flm_path.string() + " is not an FLM checkpoint");
  nlohmann::json a = am, f = fm;
  a.erase("kind");
  f.erase("kind");
  if (a != f) throw FormatError("agent and FLM checkpoints come from different summarizer configs");
  auto model = std::make_unique<SummarizerModel>(config_from_meta(am));
  nn::load_checkpoint(agent_path, model->agent_store_);
  nn::load_checkpoint(flm_path, model->flm_store_);
  return model;
}

// ---------------------------------------------------------------- Training

TrainPhase phase_at(long it, long phase_length) {
  if (phase_length < 1) throw ValidationError("phase length must be positive");
  return ((it - 1) / phase_length) % 2 == 0 ? TrainPhase::kFlm : TrainPhase::kAgent;
}

double summarizer_validation_loss(const SummarizerModel& model, std::span<const EpisodeInput> cases) {
  if (cases.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& c : cases) {
    const std::vector<double> p = model.classify(c);
    total -= std::log(p.at(static_cast<std::size_t>(c.label)) + 1e-12);
  }
  return total / static_cast<double>(cases.size());
}

SummarizerTrainLog alternating_train(SummarizerModel& model, std::span<const EpisodeInput> train,
                                     std::span<const EpisodeInput> validation, const SummarizerTrainConfig& cfg,
                                     std::uint64_t seed,
                                     const std::function<void(long, TrainPhase, double)>& progress) {
  if (train.empty()) throw ValidationError("alternating_train: empty dataset");
  if (cfg.flm_batch < 1) throw ValidationError("alternating_train: FLM batch must be positive");
  cfg.reinforce.validate();
  cfg.flm_optim.validate();
  for (const auto& c : train) {
    if (c.label < 0 || c.label >= model.config().classes) throw ValidationError("alternating_train: label out of range");
  }
  const bool with_agent = model.config().mode == SelectionMode::kAgent;
  Rng rng(mix_seed(seed, 505));
  ReinforceState state;
  SummarizerTrainLog log;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_agent, best_flm;
  const int n = static_cast<int>(train.size());

  for (long it = 1; it <= cfg.iterations; ++it) {
    const TrainPhase phase = with_agent ? phase_at(it, cfg.phase_length) : TrainPhase::kFlm;
    double value = 0.0;
    if (phase == TrainPhase::kAgent) {
      const EpisodeInput& input = train[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
      const UpdateStats s = reinforce_update(model, input, cfg.reward, cfg.reinforce, state, rng);
      value = s.mean_reward;
      log.sizes.push_back(s.mean_size);
    } else {
      for (int b = 0; b < cfg.flm_batch; ++b) {
        const EpisodeInput& input = train[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
        std::vector<int> actions(input.steps.rows, model.config().mode == SelectionMode::kAllPlanes ? 1 : 0);
        if (with_agent) actions = sample_actions(model.agent().select_probs(input.steps, nullptr), rng);
        const SliceSummary s = build_summary(input, actions);
        value += model.flm().backward_cross_entropy(s.fused, input.volume_feature, input.label, 1.0 / cfg.flm_batch);
      }
      value /= cfg.flm_batch;
      nn::adamw_step(model.flm_params(), cfg.flm_optim);
      log.sizes.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    log.phases.push_back(phase);
    log.values.push_back(value);
    if (progress) progress(it, phase, value);

    const bool validate_now = !validation.empty() && cfg.validate_every > 0 &&
                              (it % cfg.validate_every == 0 || it == cfg.iterations);
    if (validate_now) {
      const double v = summarizer_validation_loss(model, validation);
      log.validation.emplace_back(it, v);
      if (v < best) {
        best = v;
        best_agent = model.agent_params().values();
        best_flm = model.flm_params().values();
        log.best_iteration = it;
      }
    }
  }
  if (!best_flm.empty()) {
    model.agent_params().set_values(best_agent);
    model.flm_params().set_values(best_flm);
  } else {
    log.best_iteration = cfg.iterations;
  }
  return log;
}

}  // namespace sploc
