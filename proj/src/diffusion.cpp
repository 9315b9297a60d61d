#include "sploc/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sploc/nn/checkpoint.hpp"

namespace sploc {

// ---------------------------------------------------------------- Denoiser

Denoiser::Denoiser(nn::ParamStore& store, const std::string& name, std::size_t hidden, int residual_blocks)
    : input_(store, name + ".input", 3 + kConditionDim, hidden), output_() {
  for (int b = 0; b < residual_blocks; ++b) {
    block_w_.emplace_back(store, name + ".block" + std::to_string(b) + ".w", hidden, hidden);
    block_u_.emplace_back(store, name + ".block" + std::to_string(b) + ".u", kConditionDim, hidden);
  }
  output_ = nn::Dense(store, name + ".output", hidden, 3);
}

void Denoiser::init_uniform(Rng& rng) {
  input_.init_uniform(rng, std::sqrt(3.0));
  for (std::size_t b = 0; b < block_w_.size(); ++b) {
    block_w_[b].init_uniform(rng, 0.5);
    block_u_[b].init_uniform(rng, 0.5);
  }
  output_.init_uniform(rng, 0.1);
}

Vec3 Denoiser::forward(const Vec3& p_t, std::span<const double> cond, Cache* cache) const {
  std::vector<double> input(3 + kConditionDim);
  std::copy(p_t.begin(), p_t.end(), input.begin());
  std::copy(cond.begin(), cond.end(), input.begin() + 3);

  const std::size_t hidden = input_.out();
  std::vector<std::vector<double>> pre, outs;
  std::vector<double> a = input_.forward(input);
  std::vector<double> h(hidden);
  nn::relu_forward(a, h);
  pre.push_back(a);
  outs.push_back(h);
  std::vector<double> u(hidden);
  for (std::size_t b = 0; b < block_w_.size(); ++b) {
    block_w_[b].forward(h, a);
    block_u_[b].forward(cond, u);
    for (std::size_t i = 0; i < hidden; ++i) a[i] += u[i];
    std::vector<double> next(h);
    for (std::size_t i = 0; i < hidden; ++i) next[i] += a[i] > 0.0 ? a[i] : 0.0;
    pre.push_back(a);
    h = next;
    outs.push_back(h);
  }
  const std::vector<double> o = output_.forward(h);
  if (cache) {
    cache->input = std::move(input);
    cache->cond.assign(cond.begin(), cond.end());
    cache->pre = std::move(pre);
    cache->hidden = std::move(outs);
  }
  return {o[0], o[1], o[2]};
}

std::vector<double> Denoiser::backward(const Cache& cache, const Vec3& deps) {
  const std::size_t hidden = input_.out();
  std::vector<double> dh(hidden);
  output_.backward(cache.hidden.back(), deps, dh);
  std::vector<double> dcond(kConditionDim, 0.0), da(hidden), dtmp(hidden), dcu(kConditionDim);
  for (std::size_t b = block_w_.size(); b-- > 0;) {
    const auto& a = cache.pre[b + 1];
    for (std::size_t i = 0; i < hidden; ++i) da[i] = a[i] > 0.0 ? dh[i] : 0.0;
    block_w_[b].backward(cache.hidden[b], da, dtmp);
    block_u_[b].backward(cache.cond, da, dcu);
    for (std::size_t i = 0; i < kConditionDim; ++i) dcond[i] += dcu[i];
    for (std::size_t i = 0; i < hidden; ++i) dh[i] += dtmp[i];
  }
  nn::relu_backward(cache.pre[0], dh, da);
  std::vector<double> dinput(3 + kConditionDim);
  input_.backward(cache.input, da, dinput);
  for (std::size_t i = 0; i < kConditionDim; ++i) dcond[i] += dinput[3 + i];
  return dcond;
}

// ---------------------------------------------------------------- Model

TrainingCase make_training_case(const Volume& volume, const PlaneParam& truth, int label) {
  return TrainingCase{&volume, pool_volume_input(volume), truth, label};
}

DiffusionModel::DiffusionModel(DiffusionModelConfig cfg)
    : cfg_(std::move(cfg)),
      schedule_(NoiseSchedule::cosine(cfg_.train_timesteps)),
      catalog_(cfg_.label_names, cfg_.text_seed) {
  if (cfg_.label_names.size() < 2) throw ValidationError("diffusion model needs at least two labels");
  if (!(cfg_.r_max > 0.0) || !(cfg_.fov > 0.0)) throw ValidationError("diffusion model needs positive r_max and fov");
  schedule_.inference_timesteps(cfg_.infer_timesteps);  // validates divisibility
  venc_ = FeatureEncoder(store_, "volume_encoder", static_cast<std::size_t>(kVolumePoolGrid * kVolumePoolGrid * kVolumePoolGrid),
                         cfg_.encoder_hidden);
  penc_ = FeatureEncoder(store_, "plane_encoder", static_cast<std::size_t>(kSlicePoolGrid * kSlicePoolGrid),
                         cfg_.encoder_hidden);
  head_ = WeightHead(store_, "weight_head");
  denoiser_ = Denoiser(store_, "denoiser", cfg_.denoiser_hidden, cfg_.residual_blocks);
  Rng rng(mix_seed(cfg_.init_seed, 101));
  venc_.init_uniform(rng);
  penc_.init_uniform(rng);
  head_.init_uniform(rng);
  denoiser_.init_uniform(rng);
  vdesc_ = FeatureEncoder(descriptor_store_, "volume_descriptor",
                          static_cast<std::size_t>(kVolumePoolGrid * kVolumePoolGrid * kVolumePoolGrid),
                          cfg_.encoder_hidden);
  pdesc_ = FeatureEncoder(descriptor_store_, "plane_descriptor", static_cast<std::size_t>(kSlicePoolGrid * kSlicePoolGrid),
                          cfg_.encoder_hidden);
  Rng drng(mix_seed(cfg_.init_seed, 101));
  vdesc_.init_uniform(drng);
  pdesc_.init_uniform(drng);
}

std::vector<double> DiffusionModel::encode_volume(std::span<const double> pooled) const {
  return venc_.forward(pooled, nullptr);
}

std::vector<double> DiffusionModel::describe_volume(std::span<const double> pooled) const {
  return cfg_.frozen_descriptors ? vdesc_.forward(pooled, nullptr) : venc_.forward(pooled, nullptr);
}

std::vector<double> DiffusionModel::describe_slice(const SliceImage& slice) const {
  const std::vector<double> pooled = pool_slice_input(slice);
  return cfg_.frozen_descriptors ? pdesc_.forward(pooled, nullptr) : penc_.forward(pooled, nullptr);
}

std::vector<double> DiffusionModel::encode_plane(const Volume& volume, const PlaneParam& plane,
                                                 SliceImage* slice_out) const {
  SliceImage img = slice_volume(volume, plane, cfg_.slice_size, cfg_.fov);
  std::vector<double> f = penc_.forward(pool_slice_input(img), nullptr);
  if (slice_out) *slice_out = std::move(img);
  return f;
}

DiffusionModel::Prediction DiffusionModel::predict(const Volume& volume, std::span<const double> c_v,
                                                   std::span<const double> c_t, const Vec3& p_t, int t,
                                                   SliceImage* slice_out) const {
  Prediction out;
  out.plane = denormalize_param(p_t, cfg_.r_max);
  out.plane_feature = encode_plane(volume, out.plane, slice_out);
  ConditionSet cs{{c_v.begin(), c_v.end()}, out.plane_feature, {c_t.begin(), c_t.end()},
                  timestep_embedding(t, cfg_.train_timesteps)};
  out.weights = head_.forward(cs, nullptr);
  out.eps = denoiser_.forward(p_t, compose_condition(cs, out.weights), nullptr);
  return out;
}

double DiffusionModel::sample_loss(const TrainingCase& c, int t, const Vec3& eps, const std::string& prompt,
                                   double grad_scale) {
  const Vec3 p0 = normalize_param(c.truth, cfg_.r_max);
  const Vec3 p_t = forward_noise(schedule_, p0, t, eps);
  const PlaneParam plane = denormalize_param(p_t, cfg_.r_max);
  const SliceImage img = slice_volume(*c.volume, plane, cfg_.slice_size, cfg_.fov);

  FeatureEncoder::Cache vcache, pcache;
  WeightHead::Cache hcache;
  Denoiser::Cache dcache;
  ConditionSet cs;
  cs.c_v = venc_.forward(c.pooled, &vcache);
  cs.c_p = penc_.forward(pool_slice_input(img), &pcache);
  cs.c_t = catalog_.embed(prompt);
  cs.t_emb = timestep_embedding(t, cfg_.train_timesteps);
  const ConditionWeights w = head_.forward(cs, &hcache);
  const std::vector<double> cond = compose_condition(cs, w);
  const Vec3 eps_hat = denoiser_.forward(p_t, cond, &dcache);

  double loss = 0.0;
  Vec3 deps;
  for (int d = 0; d < 3; ++d) {
    const double diff = eps_hat[d] - eps[d];
    loss += diff * diff;
    deps[d] = 2.0 * diff * grad_scale;
  }
  if (!std::isfinite(loss)) throw TrainingError("non-finite diffusion loss at t=" + std::to_string(t));
  if (grad_scale == 0.0) return loss;

  const std::vector<double> dcond = denoiser_.backward(dcache, deps);
  const ComposeGrad cg = compose_condition_backward(cs, w, dcond);
  const std::vector<double> dhead = head_.backward(hcache, cg.dweights);
  std::vector<double> dc_v(cg.dc_v), dc_p(cg.dc_p);
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    dc_v[i] += dhead[i];
    dc_p[i] += dhead[kFeatureDim + i];
  }
  // c_t is frozen and t_emb is fixed: their gradients stop here.
  venc_.backward(vcache, dc_v);
  penc_.backward(pcache, dc_p);
  return loss;
}

LocalizeResult DiffusionModel::localize(const Volume& volume, const LocalizeConfig& cfg) const {
  if (!trained_) throw TrainingError("localize: diffusion model has not been trained or loaded");
  if (cfg.k < 1) throw ValidationError("localize: K must be at least 1");
  const std::string prompt = cfg.prompt.empty() ? PromptCatalog::inference_prompt() : cfg.prompt;
  const std::vector<double> pooled = pool_volume_input(volume);
  const std::vector<double> c_v = encode_volume(pooled);
  const std::vector<double> c_t = catalog_.embed(prompt);
  const std::vector<int> ts = schedule_.inference_timesteps(cfg_.infer_timesteps);

  Rng rng(cfg.seed);
  std::vector<Vec3> inits(cfg.k);
  for (auto& v : inits) v = rng.normal3();

  LocalizeResult result;
  result.chains.resize(cfg.k);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < cfg.k; ++k) {
    Trajectory& traj = result.chains[k];
    traj.steps.reserve(ts.size());
    Vec3 p = inits[k];
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const int t = ts[i];
      const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
      TrajectoryStep step;
      SliceImage img;
      const bool keep = cfg.capture_slices && k == 0;
      Prediction pr = predict(volume, c_v, c_t, p, t, &img);
      step.t = t;
      step.state = p;
      step.plane = pr.plane;
      step.feature = cfg_.frozen_descriptors ? describe_slice(img) : std::move(pr.plane_feature);
      step.weights = pr.weights;
      if (keep) step.slice = std::move(img);
      traj.steps.push_back(std::move(step));
      p = ddim_step(schedule_, p, t, t_prev, pr.eps);
    }
    traj.endpoint = p;
    traj.endpoint_plane = denormalize_param(p, cfg_.r_max);
  }

  std::vector<PlaneParam> endpoints;
  for (const auto& c : result.chains) endpoints.push_back(c.endpoint_plane);
  result.plane = mean_param(endpoints);
  result.volume_feature = describe_volume(pooled);
  SliceImage final_img = slice_volume(volume, result.plane, cfg_.slice_size, cfg_.fov);
  result.final_feature = describe_slice(final_img);
  if (cfg.capture_slices) result.final_slice = std::move(final_img);
  return result;
}

std::vector<NormalizedParam> DiffusionModel::localize_endpoints(const Volume& volume, const std::string& prompt,
                                                                int k, std::uint64_t seed) const {
  const LocalizeResult r = localize(volume, LocalizeConfig{k, seed, prompt, false});
  std::vector<NormalizedParam> out;
  for (const auto& c : r.chains) out.push_back(c.endpoint);
  return out;
}

void DiffusionModel::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["kind"] = "diffusion";
  meta["train_timesteps"] = cfg_.train_timesteps;
  meta["infer_timesteps"] = cfg_.infer_timesteps;
  meta["denoiser_hidden"] = cfg_.denoiser_hidden;
  meta["residual_blocks"] = cfg_.residual_blocks;
  meta["encoder_hidden"] = cfg_.encoder_hidden;
  meta["slice_size"] = cfg_.slice_size;
  meta["fov"] = cfg_.fov;
  meta["r_max"] = cfg_.r_max;
  meta["label_names"] = cfg_.label_names;
  meta["text_seed"] = cfg_.text_seed;
  meta["init_seed"] = cfg_.init_seed;
  meta["frozen_descriptors"] = cfg_.frozen_descriptors;
  nn::save_checkpoint(path, store_, meta);
}

std::unique_ptr<DiffusionModel> DiffusionModel::load(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::read_checkpoint_meta(path);
  if (meta.value("kind", "") != "diffusion") throw FormatError(path.string() + " is not a diffusion checkpoint");
  DiffusionModelConfig cfg;
  cfg.train_timesteps = meta.at("train_timesteps");
  cfg.infer_timesteps = meta.at("infer_timesteps");
  cfg.denoiser_hidden = meta.at("denoiser_hidden");
  cfg.residual_blocks = meta.at("residual_blocks");
  cfg.encoder_hidden = meta.at("encoder_hidden");
  cfg.slice_size = meta.at("slice_size");
  cfg.fov = meta.at("fov");
  cfg.r_max = meta.at("r_max");
  cfg.label_names = meta.at("label_names").get<std::vector<std::string>>();
  cfg.text_seed = meta.at("text_seed");
  cfg.init_seed = meta.at("init_seed");
  cfg.frozen_descriptors = meta.value("frozen_descriptors", cfg.frozen_descriptors);
  auto model = std::make_unique<DiffusionModel>(cfg);
  nn::load_checkpoint(path, model->store_);
  model->trained_ = true;
  return model;
}

// ---------------------------------------------------------------- Training

namespace {
std::string draw_prompt(const DiffusionModel& model, int label, double label_free_prob, Rng& rng) {
  return rng.bernoulli(label_free_prob) ? PromptCatalog::label_free_training_prompt()
                                        : model.catalog().training_prompt(label);
}
}  // namespace

double train_step(DiffusionModel& model, std::span<const TrainingCase* const> batch, Rng& rng,
                  const DiffusionTrainConfig& cfg) {
  if (batch.empty()) throw ValidationError("train_step on an empty batch");
  const int T = model.config().train_timesteps;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const TrainingCase* c : batch) {
    const int t = rng.uniform_int(1, T);
    const Vec3 eps = rng.normal3();
    const std::string prompt = draw_prompt(model, c->label, cfg.label_free_prob, rng);
    total += model.sample_loss(*c, t, eps, prompt, scale);
  }
  nn::adamw_step(model.params(), cfg.optim);
  return total * scale;
}

double validation_loss(DiffusionModel& model, std::span<const TrainingCase> cases, const DiffusionTrainConfig& cfg,
                       std::uint64_t seed) {
  if (cases.empty()) return std::numeric_limits<double>::quiet_NaN();
  Rng rng(seed);
  const int T = model.config().train_timesteps;
  double total = 0.0;
  long n = 0;
  for (const auto& c : cases) {
    for (int d = 0; d < cfg.validation_draws; ++d) {
      const int t = rng.uniform_int(1, T);
      const Vec3 eps = rng.normal3();
      const std::string prompt = draw_prompt(model, c.label, cfg.label_free_prob, rng);
      total += model.sample_loss(c, t, eps, prompt, 0.0);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

DiffusionTrainLog train_diffusion(DiffusionModel& model, std::span<const TrainingCase> train,
                                  std::span<const TrainingCase> validation, const DiffusionTrainConfig& cfg,
                                  std::uint64_t seed, const std::function<void(long, double)>& progress) {
  if (train.empty()) throw ValidationError("train_diffusion: empty training set");
  if (cfg.batch < 1) throw ValidationError("train_diffusion: batch must be positive");
  cfg.optim.validate();
  Rng rng(mix_seed(seed, 202));
  const std::uint64_t val_seed = mix_seed(seed, 303);
  DiffusionTrainLog log;
  log.losses.reserve(static_cast<std::size_t>(cfg.iterations));
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_values;
  std::vector<const TrainingCase*> batch(cfg.batch);
  for (long it = 1; it <= cfg.iterations; ++it) {
    for (auto& b : batch) b = &train[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(train.size()) - 1))];
    const double loss = train_step(model, batch, rng, cfg);
    log.losses.push_back(loss);
    if (progress) progress(it, loss);
    const bool validate_now = !validation.empty() && cfg.validate_every > 0 &&
                              (it % cfg.validate_every == 0 || it == cfg.iterations);
    if (validate_now) {
      const double v = validation_loss(model, validation, cfg, val_seed);
      log.validation.emplace_back(it, v);
      if (v < best) {
        best = v;
        best_values = model.params().values();
        log.best_iteration = it;
      }
    }
  }
  if (!best_values.empty()) model.params().set_values(best_values);
  if (validation.empty()) log.best_iteration = cfg.iterations;
  model.set_trained(true);
  return log;
}

}  // namespace sploc
