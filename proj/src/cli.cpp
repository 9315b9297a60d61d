#include "sploc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "sploc/experiment.hpp"
#include "sploc/volume_io.hpp"

namespace sploc {

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "INI settings file")->check(CLI::ExistingFile);
  app->add_option("--set", o.overrides, "Override a setting: section.key=value (repeatable)");
  app->add_option("--seed", o.seed, "Seed for every random stream of the command");
  app->add_flag("--quiet", o.quiet, "Suppress progress messages");
}

ExperimentConfig resolve(const CommonOptions& o) {
  Config c = o.config.empty() ? Config{} : Config::load(o.config);
  c.apply_overrides(o.overrides);
  if (o.seed) c.set("experiment.seed", std::to_string(*o.seed));
  return ExperimentConfig::from_config(c);
}

Logger make_logger(const CommonOptions& o, std::ostream& err) {
  if (o.quiet) return nullptr;
  return [&err](const std::string& s) { err << "[sploc] " << s << std::endl; };
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string pgm_name(int index, int t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "step_%03d_t%04d.pgm", index, t);
  return buf;
}

std::string replace_label(std::string prompt, const std::string& label) {
  const std::string key = "{label}";
  for (auto pos = prompt.find(key); pos != std::string::npos; pos = prompt.find(key, pos + label.size())) {
    prompt.replace(pos, key.size(), label);
  }
  return prompt;
}

/// id,label rows; a header line is skipped when its label column is not numeric.
std::map<std::string, int> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open labels file " + path.string());
  std::map<std::string, int> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("labels file line without a comma: " + line);
    const std::string id = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const int label = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      out[id] = label;
    } catch (const std::exception&) {
      if (!first) throw FormatError("labels file has a non-integer label: " + line);
    }
    first = false;
  }
  return out;
}

std::vector<std::filesystem::path> json_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<EpisodeInput> load_episodes(const std::filesystem::path& dir, const std::string& labels_path) {
  std::map<std::string, int> labels;
  if (!labels_path.empty()) labels = read_labels_csv(labels_path);
  std::vector<EpisodeInput> out;
  for (const auto& f : json_files(dir)) {
    const nlohmann::json j = read_json(f);
    const std::string id = f.stem().string();
    int label = -1;
    if (const auto it = labels.find(id); it != labels.end()) {
      label = it->second;
    } else if (j.contains("label") && j["label"].is_number_integer()) {
      label = j["label"].get<int>();
    }
    if (label < 0) throw ValidationError("no label for trajectory " + id);
    out.push_back(episode_from_json(j, label));
  }
  if (out.empty()) throw ValidationError("no trajectory JSON files in " + dir.string());
  return out;
}

int cmd_gen_data(const CommonOptions& o, const std::string& out_dir, std::optional<int> count, std::ostream& out,
                 std::ostream& err) {
  ExperimentConfig cfg = resolve(o);
  if (count) cfg.data.count = *count;
  const auto log = make_logger(o, err);
  if (log) log("generating " + std::to_string(cfg.data.count) + " phantoms in " + out_dir);
  const Manifest m = generate_dataset(cfg.data, out_dir, cfg.seed);
  out << (std::filesystem::path(out_dir) / "manifest.json").string() << "\n";
  (void)m;
  return 0;
}

int cmd_train_diffusion(const CommonOptions& o, const std::string& manifest_path, std::optional<long> steps,
                        std::optional<int> batch, std::optional<double> lr, const std::string& out_ckpt,
                        const std::string& out_log, std::ostream& err) {
  ExperimentConfig cfg = resolve(o);
  if (steps) cfg.diffusion.iterations = *steps;
  if (batch) cfg.diffusion.batch = *batch;
  if (lr) cfg.diffusion.optim.learning_rate = *lr;
  cfg.diffusion.optim.validate();
  const auto log = make_logger(o, err);
  const Manifest m = load_manifest(manifest_path);
  const auto train = load_split(m, "train");
  const auto val = load_split(m, "val");
  if (train.empty()) throw ValidationError("manifest has no training cases");
  DiffusionModel model(resolve_model_config(cfg, m.label_names, train.front().volume));
  const auto tc = training_cases(train);
  const auto vc = training_cases(val);
  const DiffusionTrainLog dlog =
      train_diffusion(model, tc, vc, cfg.diffusion, mix_seed(cfg.seed, 21), [&](long it, double loss) {
        if (log && it % 1000 == 0) log("step " + std::to_string(it) + " loss " + std::to_string(loss));
      });
  model.save(out_ckpt);
  if (!out_log.empty()) {
    write_json(out_log, {{"losses", dlog.losses}, {"validation", dlog.validation}, {"best_iteration", dlog.best_iteration}});
  }
  return 0;
}

int cmd_localize(const CommonOptions& o, const std::string& volume_path, const std::string& ckpt, int k,
                 const std::string& prompt_template, const std::string& out_traj, bool no_slices, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(1);
  const auto model = DiffusionModel::load(ckpt);
  const LoadedVolume lv = load_volume(volume_path);
  std::string prompt = prompt_template;
  if (lv.sidecar && prompt.find("{label}") != std::string::npos) {
    const auto& names = model->config().label_names;
    const int label = lv.sidecar->truth.label;
    if (label >= 0 && label < static_cast<int>(names.size())) prompt = replace_label(prompt, names[label]);
  }
  if (prompt.find("{label}") != std::string::npos) {
    throw ValidationError("prompt template needs a label but the volume has no sidecar");
  }
  LocalizeConfig lc{k, seed, prompt, !no_slices};
  const LocalizeResult res = model->localize(lv.volume, lc);
  nlohmann::json j = trajectory_json(res, prompt.empty() ? PromptCatalog::inference_prompt() : prompt, k, seed);
  j["volume"] = volume_path;
  j["label_names"] = model->config().label_names;
  if (lv.sidecar) {
    j["label"] = lv.sidecar->truth.label;
    const PlaneParam& t = lv.sidecar->truth.plane;
    j["truth"] = {{"r", t.r}, {"eta", t.eta}, {"theta", t.theta}};
    j["ang"] = angle_metric(res.plane, t);
    j["dis"] = distance_metric(res.plane, t);
  } else {
    j["label"] = nullptr;
  }
  if (!no_slices) {
    const std::filesystem::path traj(out_traj);
    const std::filesystem::path dir = traj.parent_path() / (traj.stem().string() + "_slices");
    std::filesystem::create_directories(dir);
    const auto& steps = res.chains.front().steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].slice) write_pgm(*steps[i].slice, dir / pgm_name(static_cast<int>(i), steps[i].t));
    }
    if (res.final_slice) write_pgm(*res.final_slice, dir / "final.pgm");
    j["slices"] = (traj.stem().string() + "_slices");
  }
  write_json(out_traj, j);
  out << "plane r=" << res.plane.r << " eta=" << res.plane.eta << " theta=" << res.plane.theta << "\n";
  return 0;
}

int cmd_train_summarizer(const CommonOptions& o, const std::string& traj_dir, const std::string& labels,
                         const std::string& val_dir, std::optional<double> alpha, std::optional<double> gamma,
                         std::optional<int> smax, std::optional<int> episodes, std::optional<double> lr,
                         std::optional<long> iterations, const std::string& mode, bool no_gf,
                         const std::string& out_agent, const std::string& out_flm, std::ostream& err) {
  ExperimentConfig cfg = resolve(o);
  auto& s = cfg.summarizer;
  if (alpha) s.reward.alpha = *alpha;
  if (gamma) s.reward.gamma = *gamma;
  if (smax) s.reward.s_max = *smax;
  if (episodes) s.reinforce.episodes = *episodes;
  if (lr) s.reinforce.learning_rate = *lr;
  if (iterations) s.iterations = *iterations;
  const auto train = load_episodes(traj_dir, labels);
  std::vector<EpisodeInput> val;
  if (!val_dir.empty()) val = load_episodes(val_dir, labels);
  int classes = 0;
  {
    const nlohmann::json first = read_json(json_files(traj_dir).front());
    if (first.contains("label_names")) classes = static_cast<int>(first["label_names"].size());
  }
  for (const auto& e : train) classes = std::max(classes, e.label + 1);
  SummarizerConfig sc;
  sc.hidden = cfg.agent_hidden;
  sc.cell = cfg.cell;
  sc.initial_prob = cfg.agent_initial_prob;
  sc.classes = std::max(classes, 2);
  sc.mode = parse_selection_mode(mode);
  sc.use_volume = !no_gf;
  sc.init_seed = mix_seed(cfg.seed, 31);
  SummarizerModel model(sc);
  const auto log = make_logger(o, err);
  alternating_train(model, train, val, s, mix_seed(cfg.seed, 41), [&](long it, TrainPhase ph, double v) {
    if (log && it % 500 == 0) {
      log("iteration " + std::to_string(it) + (ph == TrainPhase::kAgent ? " agent reward " : " flm loss ") +
          std::to_string(v));
    }
  });
  model.save(out_agent, out_flm);
  return 0;
}

int cmd_summarize(const std::string& traj, const std::string& agent, const std::string& flm,
                  const std::string& out_json) {
  const auto model = SummarizerModel::load(agent, flm);
  const nlohmann::json j = read_json(traj);
  const int label = j.contains("label") && j["label"].is_number_integer() ? j["label"].get<int>() : 0;
  const EpisodeInput ep = episode_from_json(j, label);
  const SliceSummary s = model->summarize(ep);
  nlohmann::json o;
  o["trajectory"] = traj;
  o["selection"] = to_string(model->config().mode);
  o["probabilities"] = model->probabilities(ep);
  o["selected"] = s.indices;
  o["final_index"] = s.final_index;
  o["fused_feature"] = s.fused;
  o["p_o"] = model->flm().forward(s.fused, ep.volume_feature);
  if (j.contains("label_names")) o["label_names"] = j["label_names"];
  write_json(out_json, o);
  return 0;
}

int cmd_classify(const CommonOptions& o, const std::string& volume_path, const std::string& ckpt,
                 const std::string& agent, const std::string& flm, int k, int uk, const std::string& out_json,
                 std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(1);
  const auto model = DiffusionModel::load(ckpt);
  const auto summ = SummarizerModel::load(agent, flm);
  const LoadedVolume lv = load_volume(volume_path);
  const LocalizeResult res = model->localize(lv.volume, LocalizeConfig{k, mix_seed(seed, 1), "", false});
  const EpisodeInput ep = episode_from(res, 0);
  const std::vector<double> p_o = summ->classify(ep);
  const ClassProbabilities cp = classify_with_uncertainty(*model, lv.volume, p_o, uk, mix_seed(seed, 2));
  nlohmann::json j;
  j["volume"] = volume_path;
  j["label_names"] = cp.label_names;
  j["plane"] = {{"r", res.plane.r}, {"eta", res.plane.eta}, {"theta", res.plane.theta}};
  j["s_unc"] = cp.s_unc;
  j["p_o"] = cp.p_o;
  j["p_u"] = cp.p_u;
  j["p_a"] = cp.p_a;
  j["coarse"] = cp.label_names[cp.coarse];
  j["original"] = cp.label_names[cp.original];
  j["final"] = cp.label_names[cp.final_label];
  if (lv.sidecar) j["truth"] = cp.label_names.at(static_cast<std::size_t>(lv.sidecar->truth.label));
  write_json(out_json, j);
  out << cp.label_names[cp.final_label] << "\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& manifest_path, const std::string& ckpt,
                 const std::vector<std::string>& agents, const std::vector<std::string>& flms,
                 const std::string& split, const std::string& out_dir, std::ostream& err) {
  ExperimentConfig cfg = resolve(o);
  if (agents.size() != flms.size()) throw ValidationError("--agent and --flm must be given the same number of times");
  const auto model = DiffusionModel::load(ckpt);
  std::vector<std::unique_ptr<SummarizerModel>> summ;
  for (std::size_t i = 0; i < agents.size(); ++i) summ.push_back(SummarizerModel::load(agents[i], flms[i]));
  const Manifest m = load_manifest(manifest_path);
  const auto cases = load_split(m, split);
  if (m.label_names != model->config().label_names) {
    throw ValidationError("manifest label set differs from the checkpoint's");
  }
  EvaluateSetup setup;
  setup.diffusion = model.get();
  for (const auto& s : summ) setup.summarizers.push_back(s.get());
  setup.k = cfg.k;
  setup.uncertainty_k = cfg.uncertainty_k;
  setup.seed = cfg.seed;
  setup.averaging = cfg.averaging;
  nlohmann::json extra;
  extra["seed"] = cfg.seed;
  extra["split"] = split;
  evaluate_cases(setup, cases, out_dir, extra, make_logger(o, err));
  return 0;
}

int cmd_run_experiment(const CommonOptions& o, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  CommonOptions copy = o;
  if (!out_dir.empty()) copy.overrides.push_back("experiment.out_dir=" + out_dir);
  const ExperimentConfig cfg = resolve(copy);
  const nlohmann::json report = run_experiment(cfg, make_logger(o, err));
  out << (cfg.out_dir / "report.json").string() << "\n";
  (void)report;
  return 0;
}

int cmd_export_curves(const std::vector<std::string>& trajectories, const std::string& out_csv) {
  std::ostringstream csv;
  csv << "id,timestep,omega_v,omega_p,omega_t\n";
  for (const auto& t : trajectories) {
    const nlohmann::json j = read_json(t);
    const std::string id = std::filesystem::path(t).stem().string();
    try {
      for (const auto& s : j.at("chains").at(0).at("steps")) {
        const auto& w = s.at("omega");
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g", s.at("t").get<int>(), w.at(0).get<double>(),
                      w.at(1).get<double>(), w.at(2).get<double>());
        csv << id << ',' << buf << '\n';
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed trajectory " + t + ": " + e.what());
    }
  }
  write_text(out_csv, csv.str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plane localization and slice summarization on 3D volumes"};
  app.name("sploc");
  app.require_subcommand(1);

  CommonOptions gen_o, td_o, loc_o, ts_o, cls_o, ev_o, run_o;

  std::string gen_out;
  std::optional<int> gen_count;
  auto* gen = app.add_subcommand("gen-data", "Generate a phantom dataset with a manifest");
  add_common(gen, gen_o);
  gen->add_option("--out-dir", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of phantoms");

  std::string td_manifest, td_out, td_log;
  std::optional<long> td_steps;
  std::optional<int> td_batch;
  std::optional<double> td_lr;
  auto* td = app.add_subcommand("train-diffusion", "Train the localization model");
  add_common(td, td_o);
  td->add_option("--data-manifest", td_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  td->add_option("--steps", td_steps, "Optimizer steps");
  td->add_option("--batch", td_batch, "Batch size");
  td->add_option("--lr", td_lr, "Learning rate");
  td->add_option("--out-checkpoint", td_out, "Checkpoint path")->required();
  td->add_option("--out-log", td_log, "Optional JSON training log");

  std::string loc_volume, loc_ckpt, loc_prompt, loc_out;
  int loc_k = 8;
  bool loc_no_slices = false;
  auto* loc = app.add_subcommand("localize", "Localize the plane in one volume");
  add_common(loc, loc_o);
  loc->add_option("--volume", loc_volume, "Volume file")->required()->check(CLI::ExistingFile);
  loc->add_option("--checkpoint", loc_ckpt, "Diffusion checkpoint")->required()->check(CLI::ExistingFile);
  loc->add_option("--k", loc_k, "Number of chains")->check(CLI::PositiveNumber);
  loc->add_option("--prompt-template", loc_prompt, "Text prompt; {label} takes the sidecar label");
  loc->add_option("--out-trajectory", loc_out, "Trajectory JSON")->required();
  loc->add_flag("--no-slices", loc_no_slices, "Skip writing PGM slices");

  std::string ts_dir, ts_labels, ts_val, ts_agent, ts_flm, ts_mode = "agent";
  std::optional<double> ts_alpha, ts_gamma, ts_lr;
  std::optional<int> ts_smax, ts_episodes;
  std::optional<long> ts_iters;
  bool ts_no_gf = false;
  auto* ts = app.add_subcommand("train-summarizer", "Train the selection agent and fusion classifier");
  add_common(ts, ts_o);
  ts->add_option("--trajectories", ts_dir, "Directory of trajectory JSON files")->required();
  ts->add_option("--labels", ts_labels, "CSV of id,label (id = trajectory file stem)");
  ts->add_option("--validation", ts_val, "Directory of validation trajectories");
  ts->add_option("--alpha", ts_alpha, "Penalty coefficient");
  ts->add_option("--gamma", ts_gamma, "Penalty sharpness");
  ts->add_option("--smax", ts_smax, "Summary size without penalty");
  ts->add_option("--episodes", ts_episodes, "Episodes per update");
  ts->add_option("--lr", ts_lr, "Agent learning rate");
  ts->add_option("--iterations", ts_iters, "Training iterations");
  ts->add_option("--mode", ts_mode, "Selection: agent, final or all");
  ts->add_flag("--no-gf", ts_no_gf, "Leave the volume feature out of the classifier");
  ts->add_option("--out-agent", ts_agent, "Agent checkpoint")->required();
  ts->add_option("--out-flm", ts_flm, "Classifier checkpoint")->required();

  std::string sum_traj, sum_agent, sum_flm, sum_out;
  auto* sum = app.add_subcommand("summarize", "Select key slices of one trajectory");
  sum->add_option("--trajectory", sum_traj, "Trajectory JSON")->required()->check(CLI::ExistingFile);
  sum->add_option("--agent", sum_agent, "Agent checkpoint")->required()->check(CLI::ExistingFile);
  sum->add_option("--flm", sum_flm, "Classifier checkpoint")->required()->check(CLI::ExistingFile);
  sum->add_option("--out-json", sum_out, "Output JSON")->required();

  std::string cls_volume, cls_ckpt, cls_agent, cls_flm, cls_out;
  int cls_k = 8, cls_uk = 8;
  auto* cls = app.add_subcommand("classify", "Classify one volume with uncertainty adjustment");
  add_common(cls, cls_o);
  cls->add_option("--volume", cls_volume, "Volume file")->required()->check(CLI::ExistingFile);
  cls->add_option("--diffusion-checkpoint", cls_ckpt, "Diffusion checkpoint")->required()->check(CLI::ExistingFile);
  cls->add_option("--agent", cls_agent, "Agent checkpoint")->required()->check(CLI::ExistingFile);
  cls->add_option("--flm", cls_flm, "Classifier checkpoint")->required()->check(CLI::ExistingFile);
  cls->add_option("--k", cls_k, "Chains for localization")->check(CLI::PositiveNumber);
  cls->add_option("--uncertainty-k", cls_uk, "Chains per category prompt")->check(CLI::Range(2, 1 << 20));
  cls->add_option("--out-json", cls_out, "Output JSON")->required();

  std::string ev_manifest, ev_ckpt, ev_split = "test", ev_out;
  std::vector<std::string> ev_agents, ev_flms;
  auto* ev = app.add_subcommand("evaluate", "Evaluate trained models on a dataset split");
  add_common(ev, ev_o);
  ev->add_option("--data-manifest", ev_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--diffusion-checkpoint", ev_ckpt, "Diffusion checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--agent", ev_agents, "Agent checkpoint (repeatable, paired with --flm)");
  ev->add_option("--flm", ev_flms, "Classifier checkpoint (repeatable)");
  ev->add_option("--split", ev_split, "Split to evaluate");
  ev->add_option("--out-dir", ev_out, "Output directory")->required();

  std::string run_out;
  auto* run = app.add_subcommand("run-experiment", "Run the whole pipeline and the ablation report");
  add_common(run, run_o);
  run->add_option("--out-dir", run_out, "Output directory (overrides experiment.out_dir)");

  std::vector<std::string> ex_traj;
  std::string ex_out;
  auto* ex = app.add_subcommand("export-curves", "Write condition-weight curves of trajectories as CSV");
  ex->add_option("--trajectory", ex_traj, "Trajectory JSON (repeatable)")->required()->check(CLI::ExistingFile);
  ex->add_option("--out-csv", ex_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen) return cmd_gen_data(gen_o, gen_out, gen_count, out, err);
    if (*td) return cmd_train_diffusion(td_o, td_manifest, td_steps, td_batch, td_lr, td_out, td_log, err);
    if (*loc) return cmd_localize(loc_o, loc_volume, loc_ckpt, loc_k, loc_prompt, loc_out, loc_no_slices, out);
    if (*ts) {
      return cmd_train_summarizer(ts_o, ts_dir, ts_labels, ts_val, ts_alpha, ts_gamma, ts_smax, ts_episodes, ts_lr,
                                  ts_iters, ts_mode, ts_no_gf, ts_agent, ts_flm, err);
    }
    if (*sum) return cmd_summarize(sum_traj, sum_agent, sum_flm, sum_out);
    if (*cls) return cmd_classify(cls_o, cls_volume, cls_ckpt, cls_agent, cls_flm, cls_k, cls_uk, cls_out, out);
    if (*ev) return cmd_evaluate(ev_o, ev_manifest, ev_ckpt, ev_agents, ev_flms, ev_split, ev_out, err);
    if (*run) return cmd_run_experiment(run_o, run_out, out, err);
    if (*ex) return cmd_export_curves(ex_traj, ex_out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sploc
