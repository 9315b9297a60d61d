#include "sploc/conditioning.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sploc/kernels.hpp"

namespace sploc {

std::vector<double> pool_volume_input(const Volume& volume) {
  return kernels::pool_volume_parallel(volume, kVolumePoolGrid);
}

std::vector<double> pool_slice_input(const SliceImage& image) {
  return kernels::pool_image(image.pixels, image.width, image.height, kSlicePoolGrid);
}

FeatureEncoder::FeatureEncoder(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden)
    : l1_(store, name + ".l1", in, hidden), l2_(store, name + ".l2", hidden, kFeatureDim) {}

void FeatureEncoder::init_uniform(Rng& rng) {
  l1_.init_uniform(rng, std::sqrt(3.0));
  l2_.init_uniform(rng);
}

std::vector<double> FeatureEncoder::forward(std::span<const double> pooled, Cache* cache) const {
  std::vector<double> pre = l1_.forward(pooled);
  std::vector<double> hidden(pre.size());
  nn::relu_forward(pre, hidden);
  std::vector<double> out = l2_.forward(hidden);
  if (cache) {
    cache->input.assign(pooled.begin(), pooled.end());
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

void FeatureEncoder::backward(const Cache& cache, std::span<const double> dfeature) {
  std::vector<double> dhidden(cache.hidden.size());
  l2_.backward(cache.hidden, dfeature, dhidden);
  std::vector<double> dpre(dhidden.size());
  nn::relu_backward(cache.pre, dhidden, dpre);
  l1_.backward(cache.input, dpre, {});
}

std::vector<double> timestep_embedding(int t, int T) {
  if (t < 0 || t > T) throw ValidationError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
  std::vector<double> e(kFeatureDim);
  const std::size_t half = kFeatureDim / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
    e[2 * k] = std::sin(t * w);
    e[2 * k + 1] = std::cos(t * w);
  }
  return e;
}

WeightHead::WeightHead(nn::ParamStore& store, const std::string& name) : dense_(store, name, kConditionDim, 3) {}

void WeightHead::init_uniform(Rng& rng) { dense_.init_uniform(rng); }

ConditionWeights WeightHead::forward(const ConditionSet& cs, Cache* cache) const {
  std::vector<double> input = nn::concat({cs.c_v, cs.c_p, cs.c_t, cs.t_emb});
  const std::vector<double> logits = dense_.forward(input);
  const ConditionWeights w{nn::sigmoid(logits[0]), nn::sigmoid(logits[1]), nn::sigmoid(logits[2])};
  if (cache) {
    cache->input = std::move(input);
    cache->weights = w;
  }
  return w;
}

std::vector<double> WeightHead::backward(const Cache& cache, const ConditionWeights& dw) {
  const auto& w = cache.weights;
  const std::vector<double> dlogits{dw.v * w.v * (1.0 - w.v), dw.p * w.p * (1.0 - w.p), dw.t * w.t * (1.0 - w.t)};
  std::vector<double> dinput(kConditionDim);
  dense_.backward(cache.input, dlogits, dinput);
  return dinput;
}

std::vector<double> compose_condition(const ConditionSet& cs, const ConditionWeights& w) {
  std::vector<double> out(kConditionDim);
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    out[i] = w.v * cs.c_v[i];
    out[kFeatureDim + i] = w.p * cs.c_p[i];
    out[2 * kFeatureDim + i] = w.t * cs.c_t[i];
    out[3 * kFeatureDim + i] = cs.t_emb[i];
  }
  return out;
}

ComposeGrad compose_condition_backward(const ConditionSet& cs, const ConditionWeights& w,
                                       std::span<const double> dcond) {
  ComposeGrad g{std::vector<double>(kFeatureDim), std::vector<double>(kFeatureDim), {0.0, 0.0, 0.0}};
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    g.dc_v[i] = w.v * dcond[i];
    g.dc_p[i] = w.p * dcond[kFeatureDim + i];
    g.dweights.v += cs.c_v[i] * dcond[i];
    g.dweights.p += cs.c_p[i] * dcond[kFeatureDim + i];
    g.dweights.t += cs.c_t[i] * dcond[2 * kFeatureDim + i];
  }
  return g;
}

PromptCatalog::PromptCatalog(std::vector<std::string> label_names, std::uint64_t seed)
    : label_names_(std::move(label_names)), seed_(seed) {}

PromptCatalog::PromptCatalog(const PromptCatalog& other)
    : label_names_(other.label_names_), seed_(other.seed_), overrides_(other.overrides_) {}

std::vector<double> PromptCatalog::keyed_vector(const std::string& key) const {
  Rng rng(mix_seed(seed_, fnv1a(key)));
  std::vector<double> v(kFeatureDim);
  double n2 = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  const double n = std::sqrt(n2);
  for (auto& x : v) x /= n;
  return v;
}

std::string PromptCatalog::category_of(const std::string& prompt) const {
  std::string best;
  for (const auto& name : label_names_) {
    if (prompt.find(name) != std::string::npos && name.size() > best.size()) best = name;
  }
  return best.empty() ? std::string("<organ>") : "<label:" + best + ">";
}

std::vector<double> PromptCatalog::embed(const std::string& prompt) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (auto it = overrides_.find(prompt); it != overrides_.end()) return it->second;
  if (auto it = cache_.find(prompt); it != cache_.end()) return it->second;
  std::vector<double> v = keyed_vector(category_of(prompt));
  const std::vector<double> phrasing = keyed_vector("<prompt:" + prompt + ">");
  double n2 = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    v[i] += 0.25 * phrasing[i];
    n2 += v[i] * v[i];
  }
  const double n = std::sqrt(n2);
  for (auto& x : v) x /= n;
  cache_.emplace(prompt, v);
  return v;
}

void PromptCatalog::load_overrides(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embedding overrides " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("embedding overrides must be a JSON object");
  std::lock_guard<std::mutex> lock(mutex_);
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto vec = it.value().get<std::vector<double>>();
    if (vec.size() != kFeatureDim) {
      throw FormatError("embedding override for '" + it.key() + "' must have 32 entries");
    }
    overrides_[it.key()] = std::move(vec);
  }
}

std::string PromptCatalog::training_prompt(int label) const {
  return "This is a " + label_names_.at(static_cast<std::size_t>(label)) + " uterus in 3D ultrasound";
}

std::string PromptCatalog::label_free_training_prompt() { return "This is a uterus in 3D ultrasound"; }

std::string PromptCatalog::inference_prompt() { return "This is a uterus ultrasound image"; }

std::string PromptCatalog::category_prompt(int label) const {
  return "This is a " + label_names_.at(static_cast<std::size_t>(label)) + " in 3D ultrasound";
}

}  // namespace sploc
