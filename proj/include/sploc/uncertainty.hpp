#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sploc/plane.hpp"

namespace sploc {

class DiffusionModel;
class Volume;

inline constexpr double kUncertaintyEpsilon = 1e-8;

struct ClassProbabilities {
  std::vector<std::string> label_names;
  std::vector<double> s_unc;
  std::vector<double> p_o;
  std::vector<double> p_u;
  std::vector<double> p_a;
  int coarse = 0;        // argmin S_unc
  int original = 0;      // argmax p_o
  int final_label = 0;   // argmax p_a
};

/// Σ_k ‖p_k - mean‖² over endpoints in normalized space. The η component
/// (period 2) is measured from its circular mean with wrapped differences.
/// Throws ValidationError for fewer than two endpoints.
double uncertainty_score(std::span<const NormalizedParam> endpoints);

/// Localizes with the category prompt of `label` and scores the K endpoints.
double uncertainty_score(const DiffusionModel& model, const Volume& volume, int label, int k, std::uint64_t seed);

/// K endpoints in normalized space for one prompt and chain seed.
using EndpointSampler =
    std::function<std::vector<NormalizedParam>(const std::string& prompt, int k, std::uint64_t seed)>;

/// One score per prompt, every prompt sampled with the same chain seed.
std::vector<double> category_scores(const EndpointSampler& sampler, std::span<const std::string> prompts, int k,
                                    std::uint64_t seed);

/// argmin, ties to the lowest index. Throws on an empty set.
int coarse_classify(std::span<const double> scores);

/// p_u(i) = (S_i + ε) / Σ_j (S_j + ε). Throws on negative scores.
std::vector<double> normalize_uncertainty(std::span<const double> scores, double eps = kUncertaintyEpsilon);

/// p_a(i) ∝ p_o(i) / max(p_u(i), ε). Throws on a length mismatch.
std::vector<double> adjust_probability(std::span<const double> p_o, std::span<const double> p_u,
                                       double eps = kUncertaintyEpsilon);

/// argmax, ties to the lowest index.
int final_decision(std::span<const double> p_a);

/// Scores every category with the same chain seed, then combines with p_o.
ClassProbabilities classify_with_uncertainty(const DiffusionModel& model, const Volume& volume,
                                             std::span<const double> p_o, int k, std::uint64_t seed);

/// Same combination from precomputed scores.
ClassProbabilities combine_probabilities(std::vector<std::string> label_names, std::vector<double> s_unc,
                                         std::vector<double> p_o);

}  // namespace sploc
