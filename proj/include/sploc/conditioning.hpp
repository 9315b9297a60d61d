#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "sploc/nn/layers.hpp"
#include "sploc/nn/matrix.hpp"
#include "sploc/slice.hpp"
#include "sploc/volume.hpp"

namespace sploc {

inline constexpr std::size_t kFeatureDim = 32;
inline constexpr std::size_t kConditionDim = 4 * kFeatureDim;
inline constexpr int kVolumePoolGrid = 8;
inline constexpr int kSlicePoolGrid = 16;
inline constexpr std::uint64_t kDefaultTextSeed = 20250;

struct ConditionSet {
  std::vector<double> c_v;    // volume feature
  std::vector<double> c_p;    // current-plane feature
  std::vector<double> c_t;    // text embedding (frozen)
  std::vector<double> t_emb;  // timestep encoding
};

struct ConditionWeights {
  double v = 0.5;
  double p = 0.5;
  double t = 0.5;
};

/// Volume average-pooled to 8³ and flattened (x fastest).
std::vector<double> pool_volume_input(const Volume& volume);
/// Slice average-pooled to 16² and flattened.
std::vector<double> pool_slice_input(const SliceImage& image);

/// Pool-then-dense encoder: Dense(in→hidden) → ReLU → Dense(hidden→32).
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  FeatureEncoder(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden);

  void init_uniform(Rng& rng);

  struct Cache {
    std::vector<double> input;
    std::vector<double> pre;
    std::vector<double> hidden;
  };

  std::vector<double> forward(std::span<const double> pooled, Cache* cache) const;
  void backward(const Cache& cache, std::span<const double> dfeature);

  nn::Dense& first() { return l1_; }
  nn::Dense& second() { return l2_; }

 private:
  nn::Dense l1_;
  nn::Dense l2_;
};

/// Timestep encoding: entries (2k, 2k+1) = (sin(t·w_k), cos(t·w_k)),
/// w_k = 10000^(-k/16), k = 0..15. Throws unless 0 ≤ t ≤ T.
std::vector<double> timestep_embedding(int t, int T);

/// concat(c_v, c_p, c_t, t_emb) → Dense(128→3) → sigmoid per logit.
class WeightHead {
 public:
  WeightHead() = default;
  WeightHead(nn::ParamStore& store, const std::string& name);

  void init_uniform(Rng& rng);
  nn::Dense& dense() { return dense_; }

  struct Cache {
    std::vector<double> input;
    ConditionWeights weights;
  };

  ConditionWeights forward(const ConditionSet& cs, Cache* cache) const;
  /// Returns d(input) for the 128-wide concatenation.
  std::vector<double> backward(const Cache& cache, const ConditionWeights& dweights);

 private:
  nn::Dense dense_;
};

/// concat(ω_v·c_v, ω_p·c_p, ω_t·c_t, t_emb).
std::vector<double> compose_condition(const ConditionSet& cs, const ConditionWeights& w);

struct ComposeGrad {
  std::vector<double> dc_v;
  std::vector<double> dc_p;
  ConditionWeights dweights;
};
ComposeGrad compose_condition_backward(const ConditionSet& cs, const ConditionWeights& w,
                                       std::span<const double> dcond);

/// Frozen text embeddings. A prompt's vector is
///   normalize(key(category) + 0.25 · key(prompt string)),
/// where `category` is the label name mentioned in the prompt (or the generic
/// organ key when none is) and key(s) is a unit Gaussian vector seeded by a
/// hash of s. Prompts about the same category therefore stay close while
/// distinct strings never coincide. Overrides loaded from JSON take precedence.
class PromptCatalog {
 public:
  explicit PromptCatalog(std::vector<std::string> label_names, std::uint64_t seed = kDefaultTextSeed);

  PromptCatalog(const PromptCatalog& other);
  PromptCatalog& operator=(const PromptCatalog&) = delete;

  std::vector<double> embed(const std::string& prompt) const;

  /// JSON object mapping prompt → array of 32 numbers.
  void load_overrides(const std::filesystem::path& path);

  std::string training_prompt(int label) const;    // "This is a {label} uterus in 3D ultrasound"
  static std::string label_free_training_prompt();  // "This is a uterus in 3D ultrasound"
  static std::string inference_prompt();            // "This is a uterus ultrasound image"
  std::string category_prompt(int label) const;     // "This is a {label} in 3D ultrasound"

  const std::vector<std::string>& label_names() const { return label_names_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<double> keyed_vector(const std::string& key) const;
  std::string category_of(const std::string& prompt) const;

  std::vector<std::string> label_names_;
  std::uint64_t seed_;
  std::map<std::string, std::vector<double>> overrides_;
  mutable std::map<std::string, std::vector<double>> cache_;
  mutable std::mutex mutex_;
};

}  // namespace sploc
