#include "sploc/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "sploc/diffusion.hpp"

namespace sploc {

double uncertainty_score(std::span<const NormalizedParam> endpoints) {
  if (endpoints.size() < 2) throw ValidationError("uncertainty score needs at least two endpoints");
  const double n = static_cast<double>(endpoints.size());
  double mr = 0.0, mt = 0.0, s = 0.0, c = 0.0;
  for (const auto& p : endpoints) {
    mr += p[0];
    s += std::sin(kPi * p[1]);
    c += std::cos(kPi * p[1]);
    mt += p[2];
  }
  mr /= n;
  mt /= n;
  const double me = std::atan2(s, c) / kPi;
  double total = 0.0;
  for (const auto& p : endpoints) {
    const double dr = p[0] - mr;
    double de = std::remainder(p[1] - me, 2.0);
    const double dt = p[2] - mt;
    total += dr * dr + de * de + dt * dt;
  }
  return total;
}

double uncertainty_score(const DiffusionModel& model, const Volume& volume, int label, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("uncertainty score needs K >= 2");
  const std::vector<NormalizedParam> ends =
      model.localize_endpoints(volume, model.catalog().category_prompt(label), k, seed);
  return uncertainty_score(ends);
}

std::vector<double> category_scores(const EndpointSampler& sampler, std::span<const std::string> prompts, int k,
                                    std::uint64_t seed) {
  if (k < 2) throw ValidationError("uncertainty score needs K >= 2");
  std::vector<double> scores;
  scores.reserve(prompts.size());
  for (const auto& prompt : prompts) scores.push_back(uncertainty_score(sampler(prompt, k, seed)));
  return scores;
}

int coarse_classify(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("coarse_classify: no scores");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> normalize_uncertainty(std::span<const double> scores, double eps) {
  if (scores.empty()) throw ValidationError("normalize_uncertainty: no scores");
  double sum = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0)) throw ValidationError("uncertainty scores must be non-negative");
    sum += s + eps;
  }
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (scores[i] + eps) / sum;
  return p;
}

std::vector<double> adjust_probability(std::span<const double> p_o, std::span<const double> p_u, double eps) {
  if (p_o.size() != p_u.size()) throw ValidationError("adjust_probability: length mismatch");
  if (p_o.empty()) throw ValidationError("adjust_probability: empty input");
  // Weights relative to the smallest uncertainty, so a uniform p_u gives exactly 1.
  double u_min = std::max(p_u[0], eps);
  for (double u : p_u) u_min = std::min(u_min, std::max(u, eps));
  std::vector<double> p(p_o.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double u = std::max(p_u[i], eps);
    p[i] = p_o[i] * (u_min / u);
    sum += p[i];
  }
  if (!(sum > 0.0)) throw ValidationError("adjust_probability: p_o has no mass");
  for (double& x : p) x /= sum;
  return p;
}

int final_decision(std::span<const double> p_a) {
  if (p_a.empty()) throw ValidationError("final_decision: empty input");
  int best = 0;
  for (std::size_t i = 1; i < p_a.size(); ++i) {
    if (p_a[i] > p_a[best]) best = static_cast<int>(i);
  }
  return best;
}

ClassProbabilities combine_probabilities(std::vector<std::string> label_names, std::vector<double> s_unc,
                                         std::vector<double> p_o) {
  if (s_unc.size() != p_o.size() || label_names.size() != p_o.size()) {
    throw ValidationError("combine_probabilities: label, score and probability counts differ");
  }
  ClassProbabilities r;
  r.p_u = normalize_uncertainty(s_unc);
  r.p_a = adjust_probability(p_o, r.p_u);
  r.coarse = coarse_classify(s_unc);
  r.original = final_decision(p_o);
  r.final_label = final_decision(r.p_a);
  r.label_names = std::move(label_names);
  r.s_unc = std::move(s_unc);
  r.p_o = std::move(p_o);
  return r;
}

ClassProbabilities classify_with_uncertainty(const DiffusionModel& model, const Volume& volume,
                                             std::span<const double> p_o, int k, std::uint64_t seed) {
  const auto& names = model.config().label_names;
  if (p_o.size() != names.size()) throw ValidationError("classify: p_o length differs from the label set");
  std::vector<std::string> prompts;
  for (std::size_t c = 0; c < names.size(); ++c) prompts.push_back(model.catalog().category_prompt(static_cast<int>(c)));
  const EndpointSampler sampler = [&](const std::string& prompt, int kk, std::uint64_t s) {
    return model.localize_endpoints(volume, prompt, kk, s);
  };
  std::vector<double> scores = category_scores(sampler, prompts, k, seed);
  return combine_probabilities(names, std::move(scores), {p_o.begin(), p_o.end()});
}

}  // namespace sploc
