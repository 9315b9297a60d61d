#include "sploc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "sploc/rng.hpp"
#include "sploc/volume_io.hpp"

namespace sploc {

void DatasetConfig::validate() const {
  if (count < 1) throw ValidationError("dataset count must be positive");
  default_label_names(classes);
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < Volume::kMinDim) throw ValidationError("dataset dims below minimum");
    if (!(spacing[d] > 0.0)) throw ValidationError("dataset spacing must be positive");
  }
  if (max_tilt < 0.0 || max_offset < 0.0) throw ValidationError("dataset tilt and offset ranges must be non-negative");
  if (!(scale_min > 0.0) || scale_max < scale_min) throw ValidationError("dataset scale range is invalid");
  if (noise_sigma < 0.0) throw ValidationError("dataset noise must be non-negative");
  if (train_ratio < 0.0 || val_ratio < 0.0 || test_ratio < 0.0 ||
      std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-6) {
    throw ValidationError("split ratios must be non-negative and sum to 1");
  }
}

PhantomSpec sample_phantom_spec(const DatasetConfig& cfg, int index, std::uint64_t seed) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  PhantomSpec s;
  s.num_classes = cfg.classes;
  s.class_label = index % cfg.classes;
  for (int d = 0; d < 3; ++d) s.rotation[d] = rng.uniform(-cfg.max_tilt, cfg.max_tilt);
  for (int d = 0; d < 3; ++d) s.offset[d] = rng.uniform(-cfg.max_offset, cfg.max_offset);
  s.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  s.noise_sigma = cfg.noise_sigma;
  s.seed = rng.engine()();
  s.dims = cfg.dims;
  s.spacing = cfg.spacing;
  return s;
}

std::vector<std::string> assign_splits(const std::vector<int>& labels, const DatasetConfig& cfg, std::uint64_t seed) {
  // Shuffle within each class, then interleave the classes round-robin so
  // every prefix of the ordering is close to class-balanced.
  Rng rng(mix_seed(seed, 909));
  const int max_label = labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
  std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) per_class[labels[i]].push_back(i);
  for (auto& idx : per_class) std::shuffle(idx.begin(), idx.end(), rng.engine());
  std::vector<std::size_t> order;
  for (std::size_t k = 0; order.size() < labels.size(); ++k) {
    for (const auto& idx : per_class) {
      if (k < idx.size()) order.push_back(idx[k]);
    }
  }
  const double n = static_cast<double>(labels.size());
  const std::size_t n_train = std::min(labels.size(), static_cast<std::size_t>(std::lround(n * cfg.train_ratio)));
  const std::size_t n_val =
      std::min(labels.size() - n_train, static_cast<std::size_t>(std::lround(n * cfg.val_ratio)));
  std::vector<std::string> split(labels.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    split[order[k]] = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
  }
  return split;
}

std::vector<const DatasetEntry*> Manifest::split(const std::string& name) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  return out;
}

Manifest generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir, std::uint64_t seed) {
  cfg.validate();
  std::filesystem::create_directories(out_dir / "volumes");
  Manifest m;
  m.label_names = default_label_names(cfg.classes);
  m.root = out_dir;
  m.seed = seed;
  std::vector<int> labels;
  for (int i = 0; i < cfg.count; ++i) labels.push_back(i % cfg.classes);
  const std::vector<std::string> splits = assign_splits(labels, cfg, seed);
  for (int i = 0; i < cfg.count; ++i) {
    const PhantomSpec spec = sample_phantom_spec(cfg, i, seed);
    const Phantom ph = generate_phantom(spec);
    char id[32];
    std::snprintf(id, sizeof id, "case_%04d", i);
    DatasetEntry e{id, std::string("volumes/") + id + ".pdv", splits[i], spec.class_label, ph.truth.plane, spec.seed};
    save_volume(out_dir / e.file, ph.volume, VolumeSidecar{ph.truth, m.label_names, spec.seed});
    m.entries.push_back(std::move(e));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "sploc-manifest";
  j["version"] = 1;
  j["label_names"] = manifest.label_names;
  j["seed"] = manifest.seed;
  j["cases"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    j["cases"].push_back({{"id", e.id},
                          {"file", e.file},
                          {"split", e.split},
                          {"label", e.label},
                          {"plane", {{"r", e.plane.r}, {"eta", e.plane.eta}, {"theta", e.plane.theta}}},
                          {"seed", e.seed}});
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format") != "sploc-manifest") throw FormatError(path.string() + " is not a dataset manifest");
    Manifest m;
    m.root = path.parent_path();
    m.label_names = j.at("label_names").get<std::vector<std::string>>();
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.at("cases")) {
      DatasetEntry e;
      e.id = c.at("id");
      e.file = c.at("file");
      e.split = c.at("split");
      e.label = c.at("label");
      const auto& p = c.at("plane");
      e.plane = {p.at("r"), p.at("eta"), p.at("theta")};
      e.seed = c.value("seed", std::uint64_t{0});
      if (e.label < 0 || e.label >= static_cast<int>(m.label_names.size())) {
        throw FormatError("manifest case " + e.id + " has an out-of-range label");
      }
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("malformed manifest " + path.string() + ": " + ex.what());
  }
}

}  // namespace sploc
