#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sploc/conditioning.hpp"
#include "sploc/nn/matrix.hpp"
#include "sploc/nn/optim.hpp"
#include "sploc/nn/recurrent.hpp"

namespace sploc {

/// One trajectory as seen by the summarizer. `steps` holds the per-step plane
/// features in denoising order; the final prediction's feature is kept apart
/// and gets index steps.rows in a summary.
struct EpisodeInput {
  nn::Matrix steps;                   // T × feature
  std::vector<double> final_feature;  // feature of the final localized plane
  std::vector<double> volume_feature; // c_v
  int label = 0;
};

struct SliceSummary {
  std::vector<int> indices;  // sorted, unique; always ends with final_index
  int final_index = 0;
  std::vector<double> fused;  // element-wise max over selected features
};

/// Feature of summary index i: a step row, or the final feature for i == T.
std::span<const double> summary_feature(const EpisodeInput& input, int index);

/// Bi-directional recurrent encoder → Dense(2H→1) → sigmoid per step.
class SelectionAgent {
 public:
  SelectionAgent() = default;
  SelectionAgent(nn::ParamStore& store, const std::string& name, std::size_t input, std::size_t hidden,
                 nn::CellType cell);

  /// Head bias starts at logit(initial_prob).
  void init_uniform(Rng& rng, double initial_prob = 0.5);

  struct Cache {
    nn::BiRecurrent::Cache rnn;
    nn::Matrix encoded;
    std::vector<double> probs;
  };

  /// Throws ValidationError on an empty sequence.
  std::vector<double> select_probs(const nn::Matrix& features, Cache* cache) const;
  /// dlogits: gradient of the objective w.r.t. each step's pre-sigmoid logit.
  void backward(const Cache& cache, std::span<const double> dlogits);

 private:
  nn::BiRecurrent rnn_;
  nn::Dense head_;
};

std::vector<int> sample_actions(std::span<const double> probs, Rng& rng);
std::vector<int> sample_actions(std::span<const double> probs, std::uint64_t seed);

SliceSummary build_summary(const EpisodeInput& input, std::span<const int> actions);

/// concat(f̂_S[, c_v]) → Dense → softmax. Without the volume branch the
/// classifier sees the fused slice feature only.
class FusionClassifier {
 public:
  FusionClassifier() = default;
  FusionClassifier(nn::ParamStore& store, const std::string& name, std::size_t feature_dim, bool use_volume,
                   int classes);

  void init_uniform(Rng& rng);
  void init_zero();

  bool use_volume() const { return use_volume_; }
  int classes() const { return classes_; }

  std::vector<double> input(std::span<const double> fused, std::span<const double> volume_feature) const;
  std::vector<double> forward(std::span<const double> fused, std::span<const double> volume_feature) const;
  /// Cross-entropy of one example; accumulates grads scaled by `scale`.
  double backward_cross_entropy(std::span<const double> fused, std::span<const double> volume_feature, int label,
                                double scale);

 private:
  nn::Dense dense_;
  std::size_t feature_dim_ = 0;
  bool use_volume_ = true;
  int classes_ = 0;
};

struct RewardConfig {
  double alpha = 1.0;
  double gamma = 1.0;
  int s_max = 5;
  bool literal_rsim = false;     // +mean similarity instead of its negative
  bool literal_penalty = false;  // α·max(0, e^{γ(|S|-S_max)}) for every |S|
};

struct RewardBreakdown {
  double r_sim = 0.0;
  double r_cls = 0.0;
  double r_penalty = 0.0;
  double total = 0.0;
};

/// Mean cosine similarity over distinct pairs of selected features; 0 for |S| < 2.
double mean_pairwise_cosine(const EpisodeInput& input, const SliceSummary& summary);

RewardBreakdown reward(const EpisodeInput& input, const SliceSummary& summary, const FusionClassifier& flm,
                       const RewardConfig& cfg);

struct ReinforceConfig {
  int episodes = 100;  // N rollouts per update
  double learning_rate = 5e-4;
  double l2 = 1e-4;  // η_reg
  double baseline_decay = 0.9;
  bool plain_sgd = false;
  void validate() const;
};

struct ReinforceState {
  double baseline = 0.0;
  bool initialized = false;
  long episodes = 0;
};

struct UpdateStats {
  double mean_reward = 0.0;
  double mean_size = 0.0;
  std::vector<double> probs;
};

/// Per-step logit gradient of -J: -(1/N)·Σ_n (R_n - b)(a_n,t - p_t).
std::vector<double> policy_logit_gradient(std::span<const double> probs,
                                          const std::vector<std::vector<int>>& actions,
                                          std::span<const double> rewards, double baseline);

class SummarizerModel;

/// N episodes on one trajectory against the frozen FLM, then one optimizer
/// step on ζ and the moving-average baseline update.
UpdateStats reinforce_update(SummarizerModel& model, const EpisodeInput& input, const RewardConfig& reward_cfg,
                             const ReinforceConfig& cfg, ReinforceState& state, Rng& rng);

enum class SelectionMode { kAgent, kFinalOnly, kAllPlanes };
SelectionMode parse_selection_mode(const std::string& s);
std::string to_string(SelectionMode m);

struct SummarizerConfig {
  std::size_t feature_dim = kFeatureDim;
  std::size_t hidden = 32;
  nn::CellType cell = nn::CellType::kGru;
  int classes = 3;
  bool use_volume = true;  // global feature branch of the FLM
  SelectionMode mode = SelectionMode::kAgent;
  double initial_prob = 0.05;  // selection probability of the untrained agent
  std::uint64_t init_seed = 0;
};

/// Agent and FLM in separate stores so each can be frozen or saved alone.
class SummarizerModel {
 public:
  explicit SummarizerModel(SummarizerConfig cfg);
  SummarizerModel(const SummarizerModel&) = delete;
  SummarizerModel& operator=(const SummarizerModel&) = delete;

  const SummarizerConfig& config() const { return cfg_; }
  SelectionAgent& agent() { return agent_; }
  const SelectionAgent& agent() const { return agent_; }
  FusionClassifier& flm() { return flm_; }
  const FusionClassifier& flm() const { return flm_; }
  nn::ParamStore& agent_params() { return agent_store_; }
  const nn::ParamStore& agent_params() const { return agent_store_; }
  nn::ParamStore& flm_params() { return flm_store_; }
  const nn::ParamStore& flm_params() const { return flm_store_; }

  /// Per-step probabilities (empty unless the mode is kAgent).
  std::vector<double> probabilities(const EpisodeInput& input) const;
  /// Deterministic summary: a_t = [prob_t ≥ 0.5] in agent mode.
  SliceSummary summarize(const EpisodeInput& input) const;
  /// p_o for the deterministic summary.
  std::vector<double> classify(const EpisodeInput& input) const;

  void save(const std::filesystem::path& agent_path, const std::filesystem::path& flm_path) const;
  static std::unique_ptr<SummarizerModel> load(const std::filesystem::path& agent_path,
                                               const std::filesystem::path& flm_path);

 private:
  SummarizerConfig cfg_;
  nn::ParamStore agent_store_;
  nn::ParamStore flm_store_;
  SelectionAgent agent_;
  FusionClassifier flm_;
};

struct SummarizerTrainConfig {
  long iterations = 4000;
  long phase_length = 1000;  // alternation period; FLM phase first
  long validate_every = 2000;
  RewardConfig reward{};
  ReinforceConfig reinforce{};
  nn::TrainConfig flm_optim{};
  int flm_batch = 8;
};

enum class TrainPhase { kAgent, kFlm };
/// Phase of 1-based iteration `it`.
TrainPhase phase_at(long it, long phase_length);

struct SummarizerTrainLog {
  std::vector<TrainPhase> phases;
  std::vector<double> values;  // mean reward (agent) or cross-entropy (FLM)
  std::vector<double> sizes;   // mean |S| per agent iteration, NaN for FLM
  std::vector<std::pair<long, double>> validation;  // mean cross-entropy
  long best_iteration = 0;
};

/// Validation objective: mean cross-entropy of p_o on deterministic summaries.
double summarizer_validation_loss(const SummarizerModel& model, std::span<const EpisodeInput> cases);

/// Alternating training. Fixed selection modes skip agent phases and only
/// fit the FLM. When validation cases are given, the best FLM and agent
/// parameters by validation loss are restored at the end.
SummarizerTrainLog alternating_train(SummarizerModel& model, std::span<const EpisodeInput> train,
                                     std::span<const EpisodeInput> validation, const SummarizerTrainConfig& cfg,
                                     std::uint64_t seed,
                                     const std::function<void(long, TrainPhase, double)>& progress = nullptr);

}  // namespace sploc
