#include "sploc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sploc/volume_io.hpp"

namespace sploc {

// ---------------------------------------------------------------- Config

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys{
      "experiment.seed",          "experiment.out_dir",         "experiment.manifest",
      "experiment.k",             "experiment.uncertainty_k",   "experiment.averaging",
      "data.count",               "data.classes",               "data.dims",
      "data.spacing",             "data.max_tilt",              "data.max_offset",
      "data.scale_min",           "data.scale_max",             "data.noise_sigma",
      "data.train_ratio",         "data.val_ratio",             "data.test_ratio",
      "diffusion.steps",          "diffusion.batch",            "diffusion.lr",
      "diffusion.weight_decay",   "diffusion.label_free_prob",  "diffusion.validate_every",
      "diffusion.validation_draws", "diffusion.train_timesteps", "diffusion.infer_timesteps",
      "diffusion.hidden",         "diffusion.residual_blocks",  "diffusion.encoder_hidden",
      "diffusion.slice_size",     "diffusion.fov",              "diffusion.text_seed",
      "diffusion.frozen_descriptors",
      "summarizer.iterations",    "summarizer.phase_length",    "summarizer.validate_every",
      "summarizer.episodes",      "summarizer.lr",              "summarizer.l2",
      "summarizer.baseline_decay", "summarizer.plain_sgd",      "summarizer.alpha",
      "summarizer.gamma",         "summarizer.smax",            "summarizer.literal_rsim",
      "summarizer.literal_penalty", "summarizer.flm_lr",        "summarizer.flm_weight_decay",
      "summarizer.flm_batch",     "summarizer.hidden",          "summarizer.cell",
      "summarizer.init_prob",
  };
  return keys;
}

namespace {

template <typename T, std::size_t N>
std::array<T, N> parse_triple(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  std::array<T, N> out{};
  std::string tok;
  std::size_t n = 0;
  while (in >> tok) {
    for (char& c : tok) {
      if (c == ',') c = ' ';
    }
    std::istringstream part(tok);
    T v;
    while (part >> v) {
      if (n == N) throw ValidationError("config key '" + key + "' expects " + std::to_string(N) + " values");
      out[n++] = v;
    }
  }
  if (n != N) throw ValidationError("config key '" + key + "' expects " + std::to_string(N) + " values");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int to_int(long v, const std::string& key) {
  if (v < -2147483647L || v > 2147483647L) throw ValidationError("config key '" + key + "' is out of range");
  return static_cast<int>(v);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
  c.check_known(known_keys());
  ExperimentConfig e;
  e.seed = c.get_uint("experiment.seed", e.seed);
  e.out_dir = c.get_string("experiment.out_dir", e.out_dir.string());
  e.manifest = c.get_string("experiment.manifest", "");
  e.k = to_int(c.get_int("experiment.k", e.k), "experiment.k");
  e.uncertainty_k = to_int(c.get_int("experiment.uncertainty_k", e.uncertainty_k), "experiment.uncertainty_k");
  e.averaging = parse_averaging(c.get_string("experiment.averaging", to_string(e.averaging)));

  auto& d = e.data;
  d.count = to_int(c.get_int("data.count", d.count), "data.count");
  d.classes = to_int(c.get_int("data.classes", d.classes), "data.classes");
  if (const auto v = c.raw("data.dims")) d.dims = parse_triple<int, 3>("data.dims", *v);
  if (const auto v = c.raw("data.spacing")) {
    const auto s = parse_triple<double, 3>("data.spacing", *v);
    d.spacing = {s[0], s[1], s[2]};
  }
  d.max_tilt = c.get_double("data.max_tilt", d.max_tilt);
  d.max_offset = c.get_double("data.max_offset", d.max_offset);
  d.scale_min = c.get_double("data.scale_min", d.scale_min);
  d.scale_max = c.get_double("data.scale_max", d.scale_max);
  d.noise_sigma = c.get_double("data.noise_sigma", d.noise_sigma);
  d.train_ratio = c.get_double("data.train_ratio", d.train_ratio);
  d.val_ratio = c.get_double("data.val_ratio", d.val_ratio);
  d.test_ratio = c.get_double("data.test_ratio", d.test_ratio);

  auto& t = e.diffusion;
  t.iterations = c.get_int("diffusion.steps", t.iterations);
  t.batch = to_int(c.get_int("diffusion.batch", t.batch), "diffusion.batch");
  t.optim.learning_rate = c.get_double("diffusion.lr", t.optim.learning_rate);
  t.optim.weight_decay = c.get_double("diffusion.weight_decay", t.optim.weight_decay);
  t.label_free_prob = c.get_double("diffusion.label_free_prob", t.label_free_prob);
  t.validate_every = c.get_int("diffusion.validate_every", t.validate_every);
  t.validation_draws = to_int(c.get_int("diffusion.validation_draws", t.validation_draws), "diffusion.validation_draws");

  auto& m = e.model;
  m.train_timesteps = to_int(c.get_int("diffusion.train_timesteps", m.train_timesteps), "diffusion.train_timesteps");
  m.infer_timesteps = to_int(c.get_int("diffusion.infer_timesteps", m.infer_timesteps), "diffusion.infer_timesteps");
  m.denoiser_hidden = to_int(c.get_int("diffusion.hidden", m.denoiser_hidden), "diffusion.hidden");
  m.residual_blocks = to_int(c.get_int("diffusion.residual_blocks", m.residual_blocks), "diffusion.residual_blocks");
  m.encoder_hidden = to_int(c.get_int("diffusion.encoder_hidden", m.encoder_hidden), "diffusion.encoder_hidden");
  m.slice_size = to_int(c.get_int("diffusion.slice_size", m.slice_size), "diffusion.slice_size");
  m.text_seed = c.get_uint("diffusion.text_seed", m.text_seed);
  m.frozen_descriptors = c.get_bool("diffusion.frozen_descriptors", m.frozen_descriptors);
  e.fov = c.get_double("diffusion.fov", e.fov);

  auto& s = e.summarizer;
  s.iterations = c.get_int("summarizer.iterations", s.iterations);
  s.phase_length = c.get_int("summarizer.phase_length", s.phase_length);
  s.validate_every = c.get_int("summarizer.validate_every", s.validate_every);
  s.reinforce.episodes = to_int(c.get_int("summarizer.episodes", s.reinforce.episodes), "summarizer.episodes");
  s.reinforce.learning_rate = c.get_double("summarizer.lr", s.reinforce.learning_rate);
  s.reinforce.l2 = c.get_double("summarizer.l2", s.reinforce.l2);
  s.reinforce.baseline_decay = c.get_double("summarizer.baseline_decay", s.reinforce.baseline_decay);
  s.reinforce.plain_sgd = c.get_bool("summarizer.plain_sgd", s.reinforce.plain_sgd);
  s.reward.alpha = c.get_double("summarizer.alpha", s.reward.alpha);
  s.reward.gamma = c.get_double("summarizer.gamma", s.reward.gamma);
  s.reward.s_max = to_int(c.get_int("summarizer.smax", s.reward.s_max), "summarizer.smax");
  s.reward.literal_rsim = c.get_bool("summarizer.literal_rsim", s.reward.literal_rsim);
  s.reward.literal_penalty = c.get_bool("summarizer.literal_penalty", s.reward.literal_penalty);
  s.flm_optim.learning_rate = c.get_double("summarizer.flm_lr", s.flm_optim.learning_rate);
  s.flm_optim.weight_decay = c.get_double("summarizer.flm_weight_decay", s.flm_optim.weight_decay);
  s.flm_batch = to_int(c.get_int("summarizer.flm_batch", s.flm_batch), "summarizer.flm_batch");
  const long hidden = c.get_int("summarizer.hidden", static_cast<long>(e.agent_hidden));
  if (hidden < 1) throw ValidationError("summarizer.hidden must be positive");
  e.agent_hidden = static_cast<std::size_t>(hidden);
  e.cell = nn::parse_cell_type(c.get_string("summarizer.cell", nn::to_string(e.cell)));
  e.agent_initial_prob = c.get_double("summarizer.init_prob", e.agent_initial_prob);
  if (!(e.agent_initial_prob > 0.0 && e.agent_initial_prob < 1.0)) {
    throw ValidationError("summarizer.init_prob must lie in (0, 1)");
  }

  if (e.k < 1) throw ValidationError("experiment.k must be positive");
  if (e.uncertainty_k < 2) throw ValidationError("experiment.uncertainty_k must be at least 2");
  d.validate();
  t.optim.validate();
  s.reinforce.validate();
  s.flm_optim.validate();
  return e;
}

Config ExperimentConfig::to_config() const {
  Config c;
  c.set("experiment.seed", std::to_string(seed));
  c.set("experiment.out_dir", out_dir.string());
  c.set("experiment.manifest", manifest.string());
  c.set("experiment.k", std::to_string(k));
  c.set("experiment.uncertainty_k", std::to_string(uncertainty_k));
  c.set("experiment.averaging", to_string(averaging));
  c.set("data.count", std::to_string(data.count));
  c.set("data.classes", std::to_string(data.classes));
  c.set("data.dims", std::to_string(data.dims[0]) + " " + std::to_string(data.dims[1]) + " " +
                         std::to_string(data.dims[2]));
  c.set("data.spacing", fmt(data.spacing[0]) + " " + fmt(data.spacing[1]) + " " + fmt(data.spacing[2]));
  c.set("data.max_tilt", fmt(data.max_tilt));
  c.set("data.max_offset", fmt(data.max_offset));
  c.set("data.scale_min", fmt(data.scale_min));
  c.set("data.scale_max", fmt(data.scale_max));
  c.set("data.noise_sigma", fmt(data.noise_sigma));
  c.set("data.train_ratio", fmt(data.train_ratio));
  c.set("data.val_ratio", fmt(data.val_ratio));
  c.set("data.test_ratio", fmt(data.test_ratio));
  c.set("diffusion.steps", std::to_string(diffusion.iterations));
  c.set("diffusion.batch", std::to_string(diffusion.batch));
  c.set("diffusion.lr", fmt(diffusion.optim.learning_rate));
  c.set("diffusion.weight_decay", fmt(diffusion.optim.weight_decay));
  c.set("diffusion.label_free_prob", fmt(diffusion.label_free_prob));
  c.set("diffusion.validate_every", std::to_string(diffusion.validate_every));
  c.set("diffusion.validation_draws", std::to_string(diffusion.validation_draws));
  c.set("diffusion.train_timesteps", std::to_string(model.train_timesteps));
  c.set("diffusion.infer_timesteps", std::to_string(model.infer_timesteps));
  c.set("diffusion.hidden", std::to_string(model.denoiser_hidden));
  c.set("diffusion.residual_blocks", std::to_string(model.residual_blocks));
  c.set("diffusion.encoder_hidden", std::to_string(model.encoder_hidden));
  c.set("diffusion.slice_size", std::to_string(model.slice_size));
  c.set("diffusion.fov", fmt(fov));
  c.set("diffusion.text_seed", std::to_string(model.text_seed));
  c.set("diffusion.frozen_descriptors", model.frozen_descriptors ? "true" : "false");
  c.set("summarizer.iterations", std::to_string(summarizer.iterations));
  c.set("summarizer.phase_length", std::to_string(summarizer.phase_length));
  c.set("summarizer.validate_every", std::to_string(summarizer.validate_every));
  c.set("summarizer.episodes", std::to_string(summarizer.reinforce.episodes));
  c.set("summarizer.lr", fmt(summarizer.reinforce.learning_rate));
  c.set("summarizer.l2", fmt(summarizer.reinforce.l2));
  c.set("summarizer.baseline_decay", fmt(summarizer.reinforce.baseline_decay));
  c.set("summarizer.plain_sgd", summarizer.reinforce.plain_sgd ? "true" : "false");
  c.set("summarizer.alpha", fmt(summarizer.reward.alpha));
  c.set("summarizer.gamma", fmt(summarizer.reward.gamma));
  c.set("summarizer.smax", std::to_string(summarizer.reward.s_max));
  c.set("summarizer.literal_rsim", summarizer.reward.literal_rsim ? "true" : "false");
  c.set("summarizer.literal_penalty", summarizer.reward.literal_penalty ? "true" : "false");
  c.set("summarizer.flm_lr", fmt(summarizer.flm_optim.learning_rate));
  c.set("summarizer.flm_weight_decay", fmt(summarizer.flm_optim.weight_decay));
  c.set("summarizer.flm_batch", std::to_string(summarizer.flm_batch));
  c.set("summarizer.hidden", std::to_string(agent_hidden));
  c.set("summarizer.cell", nn::to_string(cell));
  c.set("summarizer.init_prob", fmt(agent_initial_prob));
  return c;
}

// ---------------------------------------------------------------- Cases

std::vector<Case> load_split(const Manifest& manifest, const std::string& split) {
  std::vector<Case> out;
  for (const DatasetEntry* e : manifest.split(split)) {
    LoadedVolume lv = load_volume(manifest.path_of(*e));
    out.push_back(Case{*e, std::move(lv.volume)});
  }
  return out;
}

DiffusionModelConfig resolve_model_config(const ExperimentConfig& cfg, const std::vector<std::string>& label_names,
                                          const Volume& reference) {
  DiffusionModelConfig m = cfg.model;
  m.label_names = label_names;
  m.r_max = reference.half_diagonal();
  m.fov = cfg.fov > 0.0 ? cfg.fov : default_fov(reference);
  m.init_seed = mix_seed(cfg.seed, 11);
  return m;
}

std::vector<TrainingCase> training_cases(const std::vector<Case>& cases) {
  std::vector<TrainingCase> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(make_training_case(c.volume, c.entry.plane, c.entry.label));
  return out;
}

std::uint64_t case_seed(std::uint64_t seed, const std::string& id, std::uint64_t stream) {
  return mix_seed(mix_seed(seed, stream), fnv1a(id));
}

EpisodeInput episode_from(const LocalizeResult& result, int label) {
  if (result.chains.empty()) throw ValidationError("episode_from: no chains");
  const auto& steps = result.chains.front().steps;
  EpisodeInput in;
  in.steps = nn::Matrix(steps.size(), result.final_feature.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    std::copy(steps[t].feature.begin(), steps[t].feature.end(), in.steps.row(t).begin());
  }
  in.final_feature = result.final_feature;
  in.volume_feature = result.volume_feature;
  in.label = label;
  return in;
}

namespace {
nlohmann::json plane_json(const PlaneParam& p) { return {{"r", p.r}, {"eta", p.eta}, {"theta", p.theta}}; }
}  // namespace

nlohmann::json trajectory_json(const LocalizeResult& result, const std::string& prompt, int k, std::uint64_t seed) {
  nlohmann::json j;
  j["prompt"] = prompt;
  j["k"] = k;
  j["seed"] = seed;
  j["plane"] = plane_json(result.plane);
  j["volume_feature"] = result.volume_feature;
  j["final_feature"] = result.final_feature;
  j["chains"] = nlohmann::json::array();
  for (const auto& c : result.chains) {
    nlohmann::json cj;
    cj["endpoint"] = c.endpoint;
    cj["endpoint_plane"] = plane_json(c.endpoint_plane);
    cj["steps"] = nlohmann::json::array();
    for (const auto& s : c.steps) {
      cj["steps"].push_back({{"t", s.t},
                             {"state", s.state},
                             {"plane", plane_json(s.plane)},
                             {"omega", {s.weights.v, s.weights.p, s.weights.t}},
                             {"feature", s.feature}});
    }
    j["chains"].push_back(std::move(cj));
  }
  return j;
}

EpisodeInput episode_from_json(const nlohmann::json& j, int label) {
  try {
    const auto& steps = j.at("chains").at(0).at("steps");
    EpisodeInput in;
    in.final_feature = j.at("final_feature").get<std::vector<double>>();
    in.volume_feature = j.at("volume_feature").get<std::vector<double>>();
    in.steps = nn::Matrix(steps.size(), in.final_feature.size());
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const auto f = steps[t].at("feature").get<std::vector<double>>();
      if (f.size() != in.steps.cols) throw FormatError("trajectory feature sizes differ");
      std::copy(f.begin(), f.end(), in.steps.row(t).begin());
    }
    in.label = label;
    return in;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed trajectory: ") + ex.what());
  }
}

// ---------------------------------------------------------------- Scoring

LocalizationScores score_localization(const Volume& volume, const PlaneParam& predicted, const PlaneParam& truth,
                                      int slice_size, double fov) {
  LocalizationScores s;
  s.ang = angle_metric(predicted, truth);
  s.dis = distance_metric(predicted, truth);
  const SliceImage a = slice_volume(volume, predicted, slice_size, fov);
  const SliceImage b = slice_volume(volume, truth, slice_size, fov);
  s.ssim = ssim(a, b);
  s.ncc = ncc(a, b);
  return s;
}

RandomBaseline random_plane_baseline(const std::vector<PlaneParam>& truths, const Volume& reference, int draws,
                                     std::uint64_t seed) {
  if (truths.empty() || draws < 1) throw ValidationError("random baseline needs truths and draws");
  Rng rng(seed);
  const Vec3 half = 0.5 * reference.extent();
  std::vector<double> ang(draws), dis(draws);
  for (int i = 0; i < draws; ++i) {
    Vec3 n;
    do {
      n = rng.normal3();
    } while (norm(n) < 1e-9);
    n = normalized(n);
    const Vec3 x{rng.uniform(-half[0], half[0]), rng.uniform(-half[1], half[1]), rng.uniform(-half[2], half[2])};
    const PlaneParam p = plane_from_normal(n, dot(n, x));
    const PlaneParam& t = truths[static_cast<std::size_t>(i) % truths.size()];
    ang[i] = angle_metric(p, t);
    dis[i] = distance_metric(p, t);
  }
  return {median(ang), median(dis), draws};
}

std::string ablation_name(const AblationFlags& f) {
  if (!f.ss && !f.gf && !f.ua) return "final_plane_only";
  if (!f.ss && f.gf && !f.ua) return "plus_gf";
  if (f.ss && !f.gf && !f.ua) return "plus_ss";
  if (!f.ss && !f.gf && f.ua) return "plus_ua";
  if (f.ss && f.gf && f.ua) return "full";
  if (f.ss && f.gf) return "ss_gf";
  if (f.gf && f.ua) return "gf_ua";
  return "ss_ua";
}

std::vector<AblationFlags> ablation_grid() {
  std::vector<AblationFlags> out;
  for (int ss = 0; ss < 2; ++ss) {
    for (int gf = 0; gf < 2; ++gf) {
      for (int ua = 0; ua < 2; ++ua) out.push_back({ss == 1, gf == 1, ua == 1});
    }
  }
  return out;
}

std::pair<std::string, std::string> variant_names(const SummarizerConfig& cfg) {
  if (cfg.mode == SelectionMode::kAllPlanes) {
    const std::string base = cfg.use_volume ? "all_planes_gf" : "all_planes";
    return {base, base + "_ua"};
  }
  const bool ss = cfg.mode == SelectionMode::kAgent;
  return {ablation_name({ss, cfg.use_volume, false}), ablation_name({ss, cfg.use_volume, true})};
}

nlohmann::json classification_entry(const std::vector<EvaluationCase>& cases, const std::vector<int>& predictions,
                                     const std::vector<std::vector<double>>& probs, int classes, Averaging averaging,
                                     const nlohmann::json& flags) {
  std::vector<int> truth;
  for (const auto& c : cases) truth.push_back(c.label);
  const ClassificationReport r = classification_metrics(truth, predictions, probs, classes, averaging);
  nlohmann::json j;
  j["flags"] = flags;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auc"] = r.auc;
  j["confusion"] = r.confusion;
  j["per_class"] = {{"precision", r.class_precision}, {"recall", r.class_recall}, {"f1", r.class_f1}};
  return j;
}

namespace {

nlohmann::json stats_json(const std::vector<double>& v) {
  const MeanStd ms = mean_std(v);
  return {{"mean", ms.mean}, {"std", ms.std}, {"median", median(v)}};
}

int argmax(const std::vector<double>& v) { return final_decision(v); }

}  // namespace

ReportFiles build_report(const EvaluationInputs& inputs, const std::vector<VariantOutputs>& variants,
                         Averaging averaging, const nlohmann::json& extra) {
  const auto& cases = inputs.cases;
  if (cases.empty()) throw ValidationError("build_report: no evaluated cases");
  const int C = static_cast<int>(inputs.label_names.size());
  ReportFiles out;
  nlohmann::json& rep = out.report;
  rep = extra;
  rep["label_names"] = inputs.label_names;
  rep["test_cases"] = cases.size();

  std::vector<double> ang, dis, ss, nc;
  for (const auto& c : cases) {
    ang.push_back(c.loc.ang);
    dis.push_back(c.loc.dis);
    ss.push_back(c.loc.ssim);
    nc.push_back(c.loc.ncc);
  }
  rep["localization"] = {{"ang", stats_json(ang)},
                         {"dis", stats_json(dis)},
                         {"ssim", stats_json(ss)},
                         {"ncc", stats_json(nc)},
                         {"random_baseline",
                          {{"ang_median", inputs.baseline.ang_median},
                           {"dis_median", inputs.baseline.dis_median},
                           {"draws", inputs.baseline.draws}}}};

  std::vector<std::vector<double>> p_u;
  std::vector<int> coarse;
  std::vector<std::vector<double>> coarse_probs;
  const std::vector<double> uniform(static_cast<std::size_t>(C), 1.0 / C);
  for (const auto& c : cases) {
    p_u.push_back(normalize_uncertainty(c.s_unc));
    coarse.push_back(c.coarse);
    coarse_probs.push_back(adjust_probability(uniform, p_u.back()));
  }

  nlohmann::json configs = nlohmann::json::object();
  const VariantOutputs* report_variant = variants.empty() ? nullptr : &variants.front();
  std::vector<std::vector<double>> report_pa;
  for (const auto& v : variants) {
    if (v.p_o.size() != cases.size()) throw ValidationError("build_report: variant output count differs");
    const auto [plain, adjusted] = variant_names(v.config);
    std::vector<int> pred_o, pred_a;
    std::vector<std::vector<double>> pa;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      pa.push_back(adjust_probability(v.p_o[i], p_u[i]));
      pred_o.push_back(argmax(v.p_o[i]));
      pred_a.push_back(argmax(pa.back()));
    }
    const bool ss = v.config.mode == SelectionMode::kAgent;
    const std::string mode = to_string(v.config.mode);
    configs[plain] = classification_entry(cases, pred_o, v.p_o, C, averaging,
                                          {{"ss", ss}, {"gf", v.config.use_volume}, {"ua", false}, {"selection", mode}});
    configs[adjusted] = classification_entry(cases, pred_a, pa, C, averaging,
                                             {{"ss", ss}, {"gf", v.config.use_volume}, {"ua", true}, {"selection", mode}});
    if (ss && v.config.use_volume) {
      report_variant = &v;
      report_pa = pa;
    } else if (report_variant == &v) {
      report_pa = pa;
    }
  }
  configs["coarse_uncertainty"] = classification_entry(
      cases, coarse, coarse_probs, C, averaging,
      {{"ss", false}, {"gf", false}, {"ua", true}, {"selection", "none"}});
  rep["classification"] = {{"averaging", to_string(averaging)}, {"configurations", configs}};

  std::ostringstream csv;
  csv << "id,ang,dis,ssim,ncc,true,coarse,argmax_po,argmax_pa\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    csv << c.id << ',' << fmt(c.loc.ang) << ',' << fmt(c.loc.dis) << ',' << fmt(c.loc.ssim) << ','
        << fmt(c.loc.ncc) << ',' << c.label << ',' << c.coarse << ',';
    if (report_variant) {
      csv << argmax(report_variant->p_o[i]) << ',' << argmax(report_pa[i]);
    } else {
      csv << ",";
    }
    csv << '\n';
  }
  out.cases_csv = csv.str();

  std::ostringstream om;
  om << "id,timestep,omega_v,omega_p,omega_t\n";
  for (const auto& c : cases) {
    for (const auto& [t, w] : c.omega) {
      om << c.id << ',' << t << ',' << fmt(w.v) << ',' << fmt(w.p) << ',' << fmt(w.t) << '\n';
    }
  }
  out.omega_csv = om.str();
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- Pipeline

nlohmann::json evaluate_cases(const EvaluateSetup& setup, const std::vector<Case>& cases,
                              const std::filesystem::path& out_dir, const nlohmann::json& extra, const Logger& log) {
  if (!setup.diffusion) throw ValidationError("evaluate: no diffusion model");
  if (cases.empty()) throw ValidationError("evaluate: no cases");
  const DiffusionModel& model = *setup.diffusion;
  const auto& mc = model.config();
  EvaluationInputs inputs;
  inputs.label_names = mc.label_names;
  std::vector<VariantOutputs> variants;
  for (const SummarizerModel* s : setup.summarizers) variants.push_back({s->config(), {}});

  std::vector<PlaneParam> truths;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Case& c = cases[i];
    if (c.entry.label < 0 || c.entry.label >= static_cast<int>(mc.label_names.size())) {
      throw ValidationError("evaluate: case " + c.entry.id + " has a label outside the model's label set");
    }
    const LocalizeResult res =
        model.localize(c.volume, LocalizeConfig{setup.k, case_seed(setup.seed, c.entry.id, 1), "", false});
    EvaluationCase ec;
    ec.id = c.entry.id;
    ec.label = c.entry.label;
    ec.loc = score_localization(c.volume, res.plane, c.entry.plane, mc.slice_size, mc.fov);
    for (const auto& s : res.chains.front().steps) ec.omega.emplace_back(s.t, s.weights);
    const EpisodeInput ep = episode_from(res, c.entry.label);
    for (std::size_t v = 0; v < variants.size(); ++v) variants[v].p_o.push_back(setup.summarizers[v]->classify(ep));
    for (std::size_t label = 0; label < mc.label_names.size(); ++label) {
      ec.s_unc.push_back(uncertainty_score(model, c.volume, static_cast<int>(label), setup.uncertainty_k,
                                           case_seed(setup.seed, c.entry.id, 2)));
    }
    ec.coarse = coarse_classify(ec.s_unc);
    truths.push_back(c.entry.plane);
    inputs.cases.push_back(std::move(ec));
    if (log && ((i + 1) % 10 == 0 || i + 1 == cases.size())) {
      log("evaluated " + std::to_string(i + 1) + "/" + std::to_string(cases.size()) + " cases");
    }
  }
  inputs.baseline = random_plane_baseline(truths, cases.front().volume, 10000, mix_seed(setup.seed, 77));

  ReportFiles files = build_report(inputs, variants, setup.averaging, extra);
  write_json(out_dir / "report.json", files.report);
  write_text(out_dir / "cases.csv", files.cases_csv);
  write_text(out_dir / "omega_curves.csv", files.omega_csv);
  return files.report;
}

nlohmann::json run_experiment(const ExperimentConfig& cfg, const Logger& log) {
  const auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  std::filesystem::create_directories(cfg.out_dir);
  Manifest manifest;
  try {
    if (cfg.manifest.empty()) {
      say("generating " + std::to_string(cfg.data.count) + " phantoms");
      manifest = generate_dataset(cfg.data, cfg.out_dir / "data", cfg.seed);
    } else {
      manifest = load_manifest(cfg.manifest);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("dataset stage: ") + e.what());
  }
  const std::vector<Case> train = load_split(manifest, "train");
  const std::vector<Case> val = load_split(manifest, "val");
  const std::vector<Case> test = load_split(manifest, "test");
  if (train.empty() || test.empty()) throw ValidationError("dataset stage: train and test splits must be non-empty");

  // Diffusion
  DiffusionModel model(resolve_model_config(cfg, manifest.label_names, train.front().volume));
  DiffusionTrainLog dlog;
  try {
    const auto tc = training_cases(train);
    const auto vc = training_cases(val);
    say("training diffusion model for " + std::to_string(cfg.diffusion.iterations) + " steps");
    dlog = train_diffusion(model, tc, vc, cfg.diffusion, mix_seed(cfg.seed, 21), [&](long it, double loss) {
      if (it % 1000 == 0) say("  step " + std::to_string(it) + " loss " + fmt(loss));
    });
    model.save(cfg.out_dir / "diffusion.ckpt");
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("diffusion stage: ") + e.what());
  }

  // Trajectory cache
  std::vector<EpisodeInput> train_eps, val_eps;
  try {
    say("localizing training and validation volumes");
    for (const auto* split : {&train, &val}) {
      auto& dst = split == &train ? train_eps : val_eps;
      for (const auto& c : *split) {
        const LocalizeResult r =
            model.localize(c.volume, LocalizeConfig{cfg.k, case_seed(cfg.seed, c.entry.id, 1), "", false});
        dst.push_back(episode_from(r, c.entry.label));
      }
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("trajectory stage: ") + e.what());
  }

  // Summarizer variants
  std::vector<std::unique_ptr<SummarizerModel>> summarizers;
  nlohmann::json summ_log = nlohmann::json::object();
  try {
    const std::vector<std::pair<SelectionMode, bool>> grid{
        {SelectionMode::kFinalOnly, false}, {SelectionMode::kFinalOnly, true}, {SelectionMode::kAgent, false},
        {SelectionMode::kAgent, true},      {SelectionMode::kAllPlanes, false}, {SelectionMode::kAllPlanes, true}};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      SummarizerConfig sc;
      sc.hidden = cfg.agent_hidden;
      sc.cell = cfg.cell;
      sc.initial_prob = cfg.agent_initial_prob;
      sc.classes = static_cast<int>(manifest.label_names.size());
      sc.mode = grid[i].first;
      sc.use_volume = grid[i].second;
      sc.init_seed = mix_seed(cfg.seed, 31);
      auto sm = std::make_unique<SummarizerModel>(sc);
      const std::string name = variant_names(sc).first;
      say("training summarizer variant " + name);
      const SummarizerTrainLog slog =
          alternating_train(*sm, train_eps, val_eps, cfg.summarizer, mix_seed(cfg.seed, 41 + i));
      double size_sum = 0.0;
      long size_n = 0;
      for (double s : slog.sizes) {
        if (!std::isnan(s)) {
          size_sum += s;
          ++size_n;
        }
      }
      summ_log[name] = {{"best_iteration", slog.best_iteration},
                      {"validation", slog.validation},
                      {"mean_training_summary_size", size_n ? size_sum / size_n : 0.0}};
      if (sc.mode == SelectionMode::kAgent && sc.use_volume) {
        sm->save(cfg.out_dir / "agent.ckpt", cfg.out_dir / "flm.ckpt");
      }
      summarizers.push_back(std::move(sm));
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("summarizer stage: ") + e.what());
  }

  // Evaluation
  nlohmann::json extra;
  extra["seed"] = cfg.seed;
  // Paths are left out so reports from different output directories compare equal.
  Config echo = cfg.to_config();
  nlohmann::json config_json = echo.values();
  config_json.erase("experiment.out_dir");
  config_json.erase("experiment.manifest");
  extra["config"] = config_json;
  extra["dataset"] = {{"train", train.size()}, {"val", val.size()}, {"test", test.size()}};
  extra["diffusion"] = {{"iterations", cfg.diffusion.iterations},
                        {"final_loss", dlog.losses.empty() ? 0.0 : dlog.losses.back()},
                        {"best_iteration", dlog.best_iteration},
                        {"validation", dlog.validation},
                        {"parameters", model.params().count()}};
  extra["summarizer"] = summ_log;
  EvaluateSetup setup;
  setup.diffusion = &model;
  for (const auto& s : summarizers) setup.summarizers.push_back(s.get());
  setup.k = cfg.k;
  setup.uncertainty_k = cfg.uncertainty_k;
  setup.seed = cfg.seed;
  setup.averaging = cfg.averaging;
  nlohmann::json report;
  try {
    say("evaluating " + std::to_string(test.size()) + " test volumes");
    report = evaluate_cases(setup, test, cfg.out_dir, extra, log);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("evaluation stage: ") + e.what());
  }

  const auto& confs = report["classification"]["configurations"];
  nlohmann::json summary;
  summary["ang_median"] = report["localization"]["ang"]["median"];
  summary["dis_median"] = report["localization"]["dis"]["median"];
  summary["random_ang_median"] = report["localization"]["random_baseline"]["ang_median"];
  summary["random_dis_median"] = report["localization"]["random_baseline"]["dis_median"];
  for (const char* name : {"final_plane_only", "plus_gf", "plus_ss", "plus_ua", "full"}) {
    summary["f1"][name] = confs[name]["f1"];
    summary["accuracy"][name] = confs[name]["accuracy"];
  }
  write_json(cfg.out_dir / "summary.json", summary);
  write_text(cfg.out_dir / "config.ini", cfg.to_config().to_string());
  return report;
}

}  // namespace sploc
