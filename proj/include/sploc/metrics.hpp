#pragma once

#include <span>
#include <string>
#include <vector>

#include "sploc/kernels.hpp"
#include "sploc/slice.hpp"

namespace sploc {

/// Mean windowed SSIM (8×8, stride 1, L = 1). Throws on a size mismatch.
double ssim(const SliceImage& a, const SliceImage& b, const kernels::SsimParams& params = {});

/// Pearson correlation of pixel values. If either input is constant the
/// result is 1 when the two are identical and 0 otherwise.
double ncc(std::span<const double> a, std::span<const double> b);
double ncc(const SliceImage& a, const SliceImage& b);

enum class Averaging { kMacro, kMicro, kWeighted };
Averaging parse_averaging(const std::string& s);
std::string to_string(Averaging a);

/// Rank-statistic AUC with ties counted as 1/2. NaN when either class is absent.
double binary_auc(std::span<const double> scores, std::span<const int> positive);

struct ClassificationReport {
  int classes = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;  // NaN without probabilities or when no class is scorable
  std::vector<double> class_precision;
  std::vector<double> class_recall;
  std::vector<double> class_f1;
  std::vector<std::vector<long>> confusion;  // [true][pred]
};

/// Averages run over labels that occur in y_true or y_pred; zero divisions
/// count as 0. `probs` may be empty, otherwise one C-vector per sample.
ClassificationReport classification_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                                             const std::vector<std::vector<double>>& probs, int classes,
                                             Averaging averaging = Averaging::kMacro);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);
double median(std::span<const double> values);

}  // namespace sploc
