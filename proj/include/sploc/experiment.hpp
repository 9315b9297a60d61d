#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sploc/config.hpp"
#include "sploc/dataset.hpp"
#include "sploc/diffusion.hpp"
#include "sploc/metrics.hpp"
#include "sploc/summarizer.hpp"
#include "sploc/uncertainty.hpp"

namespace sploc {

struct ExperimentConfig {
  std::filesystem::path manifest;  // empty: generate under out_dir/data
  std::filesystem::path out_dir = "run";
  std::uint64_t seed = 1;
  DatasetConfig data{};
  DiffusionModelConfig model{};  // label_names and r_max are filled from the data
  DiffusionTrainConfig diffusion{};
  int k = 8;
  SummarizerTrainConfig summarizer{};
  std::size_t agent_hidden = 32;
  nn::CellType cell = nn::CellType::kGru;
  double agent_initial_prob = 0.05;
  int uncertainty_k = 8;
  Averaging averaging = Averaging::kMacro;
  double fov = 0.0;  // mm; 0 uses the largest volume extent

  /// Every key accepted in a config file.
  static const std::vector<std::string>& known_keys();
  static ExperimentConfig from_config(const Config& cfg);
  /// The resolved settings, one entry per known key.
  Config to_config() const;
};

struct Case {
  DatasetEntry entry;
  Volume volume;
};

std::vector<Case> load_split(const Manifest& manifest, const std::string& split);

/// Model settings for volumes shaped like `reference`.
DiffusionModelConfig resolve_model_config(const ExperimentConfig& cfg, const std::vector<std::string>& label_names,
                                          const Volume& reference);

std::vector<TrainingCase> training_cases(const std::vector<Case>& cases);

/// Per-case localization seed derived from the run seed and the case id.
std::uint64_t case_seed(std::uint64_t seed, const std::string& id, std::uint64_t stream);

/// Chain 0's step features, the final feature and c_v.
EpisodeInput episode_from(const LocalizeResult& result, int label);

nlohmann::json trajectory_json(const LocalizeResult& result, const std::string& prompt, int k, std::uint64_t seed);
EpisodeInput episode_from_json(const nlohmann::json& trajectory, int label);

struct LocalizationScores {
  double ang = 0.0;
  double dis = 0.0;
  double ssim = 0.0;
  double ncc = 0.0;
};

/// Ang and Dis against the truth, SSIM and NCC between the predicted and true slices.
LocalizationScores score_localization(const Volume& volume, const PlaneParam& predicted, const PlaneParam& truth,
                                      int slice_size, double fov);

struct RandomBaseline {
  double ang_median = 0.0;
  double dis_median = 0.0;
  int draws = 0;
};

/// Planes with a uniform random normal through a uniform random point of the
/// volume box, scored against the given truths.
RandomBaseline random_plane_baseline(const std::vector<PlaneParam>& truths, const Volume& reference, int draws,
                                     std::uint64_t seed);

struct AblationFlags {
  bool ss = false;  // agent-selected summary instead of the final plane alone
  bool gf = false;  // volume feature in the FLM
  bool ua = false;  // uncertainty adjustment of p_o
};

/// Report key of a flag combination, e.g. "final_plane_only", "plus_gf", "full".
std::string ablation_name(const AblationFlags& f);
std::vector<AblationFlags> ablation_grid();

struct EvaluationCase {
  std::string id;
  int label = 0;
  LocalizationScores loc;
  std::vector<std::pair<int, ConditionWeights>> omega;  // chain 0: (t, ω)
  std::vector<double> s_unc;
  int coarse = 0;
};

struct EvaluationInputs {
  std::vector<EvaluationCase> cases;
  std::vector<std::string> label_names;
  RandomBaseline baseline;
};

/// Report names of a summarizer variant without and with uncertainty adjustment.
std::pair<std::string, std::string> variant_names(const SummarizerConfig& cfg);

/// p_o per case for one trained summarizer variant.
struct VariantOutputs {
  SummarizerConfig config;
  std::vector<std::vector<double>> p_o;
};

nlohmann::json classification_entry(const std::vector<EvaluationCase>& cases, const std::vector<int>& predictions,
                                     const std::vector<std::vector<double>>& probs, int classes, Averaging averaging,
                                     const nlohmann::json& flags);

struct ReportFiles {
  nlohmann::json report;
  std::string cases_csv;
  std::string omega_csv;
};

/// report.json, cases.csv and omega_curves.csv content for evaluated cases.
ReportFiles build_report(const EvaluationInputs& inputs, const std::vector<VariantOutputs>& variants,
                         Averaging averaging, const nlohmann::json& extra);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

using Logger = std::function<void(const std::string&)>;

/// Trained artifacts, reused by `evaluate`.
struct EvaluateSetup {
  const DiffusionModel* diffusion = nullptr;
  std::vector<const SummarizerModel*> summarizers;  // variant models; flags from their configs
  int k = 8;
  int uncertainty_k = 8;
  std::uint64_t seed = 1;
  Averaging averaging = Averaging::kMacro;
};

/// Localizes, summarizes and scores every case, then writes the three output
/// files to `out_dir`. Returns the report.
nlohmann::json evaluate_cases(const EvaluateSetup& setup, const std::vector<Case>& cases,
                              const std::filesystem::path& out_dir, const nlohmann::json& extra,
                              const Logger& log = nullptr);

/// Whole pipeline: data, diffusion training, trajectory cache, every summarizer variant,
/// test-split evaluation and the ablation report.
nlohmann::json run_experiment(const ExperimentConfig& cfg, const Logger& log = nullptr);

}  // namespace sploc
