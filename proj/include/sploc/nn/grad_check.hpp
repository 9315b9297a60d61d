#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "sploc/nn/param_store.hpp"

namespace sploc::nn {

struct GradCheckOptions {
  double step = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, floor); gradients smaller
  /// than the floor are judged on absolute error instead.
  double floor = 1e-5;
  /// Entries checked per parameter tensor; 0 checks everything. Sampled
  /// entries are drawn with `seed`.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// `loss(with_grad)` returns a scalar loss; when `with_grad` is true it must
/// also accumulate analytic gradients into `store`. Central differences are
/// taken on every trainable parameter (or a sample of entries).
GradCheckResult grad_check(ParamStore& store, const std::function<double(bool with_grad)>& loss,
                           const GradCheckOptions& options = {});

}  // namespace sploc::nn
