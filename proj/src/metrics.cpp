#include "sploc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sploc {

double ssim(const SliceImage& a, const SliceImage& b, const kernels::SsimParams& params) {
  if (a.width != b.width || a.height != b.height) throw ValidationError("ssim: image sizes differ");
  return kernels::ssim_parallel(a.pixels, b.pixels, a.width, a.height, params);
}

double ncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("ncc: image sizes differ");
  if (a.empty()) throw ValidationError("ncc: empty images");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::equal(a.begin(), a.end(), b.begin()) ? 1.0 : 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double ncc(const SliceImage& a, const SliceImage& b) {
  if (a.width != b.width || a.height != b.height) throw ValidationError("ncc: image sizes differ");
  return ncc(a.pixels, b.pixels);
}

Averaging parse_averaging(const std::string& s) {
  if (s == "macro") return Averaging::kMacro;
  if (s == "micro") return Averaging::kMicro;
  if (s == "weighted") return Averaging::kWeighted;
  throw ValidationError("unknown averaging '" + s + "' (expected macro, micro or weighted)");
}

std::string to_string(Averaging a) {
  switch (a) {
    case Averaging::kMacro: return "macro";
    case Averaging::kMicro: return "micro";
    case Averaging::kWeighted: return "weighted";
  }
  return "macro";
}

double binary_auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw ValidationError("auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  // Average ranks (1-based) over tied groups.
  double rank_sum = 0.0;
  long pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (positive[order[k]]) {
        rank_sum += avg;
        ++pos;
      }
    }
    i = j + 1;
  }
  const long neg = static_cast<long>(n) - pos;
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

namespace {
double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }
}  // namespace

ClassificationReport classification_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                                             const std::vector<std::vector<double>>& probs, int classes,
                                             Averaging averaging) {
  if (y_true.size() != y_pred.size()) throw ValidationError("classification_metrics: length mismatch");
  if (y_true.empty()) throw ValidationError("classification_metrics: empty input");
  if (classes < 2) throw ValidationError("classification_metrics: need at least two classes");
  if (!probs.empty() && probs.size() != y_true.size()) {
    throw ValidationError("classification_metrics: one probability vector per sample required");
  }
  const std::size_t n = y_true.size();
  const std::size_t C = static_cast<std::size_t>(classes);
  ClassificationReport r;
  r.classes = classes;
  r.confusion.assign(C, std::vector<long>(C, 0));
  for (std::size_t i = 0; i < n; ++i) {
    if (y_true[i] < 0 || y_true[i] >= classes || y_pred[i] < 0 || y_pred[i] >= classes) {
      throw ValidationError("classification_metrics: label out of range");
    }
    ++r.confusion[y_true[i]][y_pred[i]];
  }

  std::vector<long> tp(C), support(C), predicted(C);
  long correct = 0;
  for (std::size_t c = 0; c < C; ++c) {
    tp[c] = r.confusion[c][c];
    correct += tp[c];
    for (std::size_t k = 0; k < C; ++k) {
      support[c] += r.confusion[c][k];
      predicted[c] += r.confusion[k][c];
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.class_precision.resize(C);
  r.class_recall.resize(C);
  r.class_f1.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    r.class_precision[c] = safe_div(tp[c], predicted[c]);
    r.class_recall[c] = safe_div(tp[c], support[c]);
    r.class_f1[c] = safe_div(2.0 * r.class_precision[c] * r.class_recall[c], r.class_precision[c] + r.class_recall[c]);
  }

  if (averaging == Averaging::kMicro) {
    r.precision = r.recall = r.f1 = r.accuracy;
  } else {
    double wsum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      if (support[c] == 0 && predicted[c] == 0) continue;
      const double w = averaging == Averaging::kWeighted ? static_cast<double>(support[c]) : 1.0;
      r.precision += w * r.class_precision[c];
      r.recall += w * r.class_recall[c];
      r.f1 += w * r.class_f1[c];
      wsum += w;
    }
    r.precision = safe_div(r.precision, wsum);
    r.recall = safe_div(r.recall, wsum);
    r.f1 = safe_div(r.f1, wsum);
  }

  r.auc = std::numeric_limits<double>::quiet_NaN();
  if (!probs.empty()) {
    for (const auto& p : probs) {
      if (p.size() != C) throw ValidationError("classification_metrics: probability vector has the wrong length");
    }
    if (averaging == Averaging::kMicro) {
      std::vector<double> scores;
      std::vector<int> pos;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
          scores.push_back(probs[i][c]);
          pos.push_back(y_true[i] == static_cast<int>(c) ? 1 : 0);
        }
      }
      r.auc = binary_auc(scores, pos);
    } else {
      double total = 0.0, wsum = 0.0;
      std::vector<double> scores(n);
      std::vector<int> pos(n);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
          scores[i] = probs[i][c];
          pos[i] = y_true[i] == static_cast<int>(c) ? 1 : 0;
        }
        const double a = binary_auc(scores, pos);
        if (std::isnan(a)) continue;
        const double w = averaging == Averaging::kWeighted ? static_cast<double>(support[c]) : 1.0;
        total += w * a;
        wsum += w;
      }
      if (wsum > 0.0) r.auc = total / wsum;
    }
  }
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double n = static_cast<double>(values.size());
  const double m = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / n)};
}

double median(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace sploc
