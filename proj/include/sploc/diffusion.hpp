#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sploc/conditioning.hpp"
#include "sploc/nn/optim.hpp"
#include "sploc/plane.hpp"
#include "sploc/schedule.hpp"
#include "sploc/slice.hpp"

namespace sploc {

/// Residual MLP ε-predictor. Input layer on p_t ⊕ cond, then residual blocks
/// h ← h + ReLU(W h + U cond + b) so the condition (and its timestep
/// encoding) reaches every block, then a linear 3-wide output.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(nn::ParamStore& store, const std::string& name, std::size_t hidden, int residual_blocks);

  void init_uniform(Rng& rng);

  struct Cache {
    std::vector<double> input;                  // p_t ⊕ cond
    std::vector<double> cond;
    std::vector<std::vector<double>> pre;       // pre-activations per hidden layer
    std::vector<std::vector<double>> hidden;    // outputs per hidden layer
  };

  Vec3 forward(const Vec3& p_t, std::span<const double> cond, Cache* cache) const;
  /// Returns d(cond); accumulates parameter grads.
  std::vector<double> backward(const Cache& cache, const Vec3& deps);

 private:
  nn::Dense input_;
  std::vector<nn::Dense> block_w_;
  std::vector<nn::Dense> block_u_;
  nn::Dense output_;
};

struct DiffusionModelConfig {
  int train_timesteps = 1000;
  int infer_timesteps = 100;
  int denoiser_hidden = 128;
  int residual_blocks = 2;  // plus the input layer: three hidden layers
  int encoder_hidden = 64;
  int slice_size = kDefaultSliceSize;
  double fov = 64.0;     // mm
  double r_max = 0.0;    // mm; half the volume diagonal
  std::vector<std::string> label_names;
  std::uint64_t text_seed = kDefaultTextSeed;
  std::uint64_t init_seed = 0;
  // Summarizer features come from never-trained copies of the encoders.
  bool frozen_descriptors = true;
};

struct DiffusionTrainConfig {
  long iterations = 20000;
  int batch = 8;
  nn::TrainConfig optim{};
  double label_free_prob = 0.5;
  long validate_every = 2000;
  int validation_draws = 4;  // noisy samples per validation case
};

struct TrainingCase {
  const Volume* volume = nullptr;
  std::vector<double> pooled;  // pool_volume_input(*volume)
  PlaneParam truth;
  int label = 0;
};

TrainingCase make_training_case(const Volume& volume, const PlaneParam& truth, int label);

struct TrajectoryStep {
  int t = 0;
  NormalizedParam state{};
  PlaneParam plane;
  std::vector<double> feature;  // descriptor of the slice at `plane`
  ConditionWeights weights;
  std::optional<SliceImage> slice;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;  // decreasing t
  NormalizedParam endpoint{};
  PlaneParam endpoint_plane;
};

struct LocalizeConfig {
  int k = 8;
  std::uint64_t seed = 0;
  std::string prompt;           // empty: the label-free inference prompt
  bool capture_slices = false;  // keep per-step slices of chain 0
};

struct LocalizeResult {
  PlaneParam plane;  // mean_param of the K endpoints
  std::vector<Trajectory> chains;
  std::vector<double> volume_feature;  // volume descriptor
  std::vector<double> final_feature;   // plane descriptor at `plane`
  std::optional<SliceImage> final_slice;
};

struct DiffusionTrainLog {
  std::vector<double> losses;  // per iteration
  std::vector<std::pair<long, double>> validation;
  long best_iteration = 0;
};

/// Volume and plane encoders, frozen text catalog, adaptive
/// weight head and denoiser sharing one ParamStore.
class DiffusionModel {
 public:
  explicit DiffusionModel(DiffusionModelConfig cfg);
  DiffusionModel(const DiffusionModel&) = delete;
  DiffusionModel& operator=(const DiffusionModel&) = delete;

  const DiffusionModelConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const PromptCatalog& catalog() const { return catalog_; }
  PromptCatalog& catalog() { return catalog_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  FeatureEncoder& volume_encoder() { return venc_; }
  FeatureEncoder& plane_encoder() { return penc_; }
  WeightHead& weight_head() { return head_; }
  Denoiser& denoiser() { return denoiser_; }

  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }

  std::vector<double> encode_volume(std::span<const double> pooled) const;
  std::vector<double> encode_plane(const Volume& volume, const PlaneParam& plane, SliceImage* slice_out) const;

  /// Features handed to the summarizer. With frozen_descriptors these use
  /// encoders fixed at their seeded initial weights, otherwise the trained ones.
  std::vector<double> describe_volume(std::span<const double> pooled) const;
  std::vector<double> describe_slice(const SliceImage& slice) const;

  struct Prediction {
    Vec3 eps;
    ConditionWeights weights;
    std::vector<double> plane_feature;
    PlaneParam plane;
  };

  /// ε̂ for state p_t given a precomputed volume feature and text embedding.
  Prediction predict(const Volume& volume, std::span<const double> c_v, std::span<const double> c_t,
                     const Vec3& p_t, int t, SliceImage* slice_out = nullptr) const;

  /// ‖ε - ε̂‖² for one training sample; when `grad_scale` is non-zero the
  /// gradient of grad_scale·loss is accumulated into params().
  double sample_loss(const TrainingCase& c, int t, const Vec3& eps, const std::string& prompt, double grad_scale);

  LocalizeResult localize(const Volume& volume, const LocalizeConfig& cfg) const;

  /// K endpoints in normalized space for one prompt; used by uncertainty scoring.
  std::vector<NormalizedParam> localize_endpoints(const Volume& volume, const std::string& prompt, int k,
                                                  std::uint64_t seed) const;

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<DiffusionModel> load(const std::filesystem::path& path);

 private:
  DiffusionModelConfig cfg_;
  NoiseSchedule schedule_;
  PromptCatalog catalog_;
  nn::ParamStore store_;
  FeatureEncoder venc_;
  FeatureEncoder penc_;
  WeightHead head_;
  Denoiser denoiser_;
  nn::ParamStore descriptor_store_;
  FeatureEncoder vdesc_;
  FeatureEncoder pdesc_;
  bool trained_ = false;
};

/// One optimizer step over a batch: t ~ U{1..T}, ε ~ N(0, I), prompt
/// label-free with probability label_free_prob. Returns the mean batch loss.
double train_step(DiffusionModel& model, std::span<const TrainingCase* const> batch, Rng& rng,
                   const DiffusionTrainConfig& cfg);

/// Mean ε-prediction loss with draws seeded independently of training.
double validation_loss(DiffusionModel& model, std::span<const TrainingCase> cases, const DiffusionTrainConfig& cfg,
                       std::uint64_t seed);

/// Training loop. When validation cases are given the parameters with the
/// lowest validation loss are restored at the end.
DiffusionTrainLog train_diffusion(DiffusionModel& model, std::span<const TrainingCase> train,
                                  std::span<const TrainingCase> validation, const DiffusionTrainConfig& cfg,
                                  std::uint64_t seed,
                                  const std::function<void(long, double)>& progress = nullptr);

}  // namespace sploc
