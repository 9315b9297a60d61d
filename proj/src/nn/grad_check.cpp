#include "sploc/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sploc/rng.hpp"

namespace sploc::nn {

GradCheckResult grad_check(ParamStore& store, const std::function<double(bool)>& loss,
                           const GradCheckOptions& options) {
  store.zero_grad();
  loss(true);
  const std::vector<double> analytic = store.grads();
  store.zero_grad();

  GradCheckResult result;
  Rng rng(options.seed);
  std::size_t offset = 0;
  for (auto& p : store.params()) {
    if (!p.trainable) {
      offset += p.size();
      continue;
    }
    std::vector<std::size_t> entries(p.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_param > 0 && entries.size() > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng.engine());
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t i : entries) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double up = loss(false);
      p.value[i] = saved - options.step;
      const double down = loss(false);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[offset + i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (result.checked == 1 || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
    offset += p.size();
  }
  return result;
}

}  // namespace sploc::nn
