#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sploc/phantom.hpp"

namespace sploc {

struct DatasetConfig {
  int count = 335;
  int classes = 3;
  std::array<int, 3> dims{64, 64, 64};
  Vec3 spacing{1.0, 1.0, 1.0};
  double max_tilt = 0.6;    // rad, per Euler angle
  double max_offset = 6.0;  // mm, per axis
  double scale_min = 17.0;
  double scale_max = 23.0;
  double noise_sigma = 10.0;
  double train_ratio = 0.6;
  double val_ratio = 0.1;
  double test_ratio = 0.3;
  void validate() const;
};

/// Spec of case `index`: label index % classes, pose and size drawn from a
/// stream seeded by (seed, index).
PhantomSpec sample_phantom_spec(const DatasetConfig& cfg, int index, std::uint64_t seed);

struct DatasetEntry {
  std::string id;
  std::string file;   // relative to the manifest directory
  std::string split;  // train, val or test
  int label = 0;
  PlaneParam plane;
  std::uint64_t seed = 0;
};

struct Manifest {
  std::vector<std::string> label_names;
  std::vector<DatasetEntry> entries;
  std::filesystem::path root;  // directory holding the manifest
  std::uint64_t seed = 0;

  std::vector<const DatasetEntry*> split(const std::string& name) const;
  std::filesystem::path path_of(const DatasetEntry& e) const { return root / e.file; }
};

/// Exactly round(n·train) train and round(n·val) val cases, the rest test,
/// balanced across classes.
std::vector<std::string> assign_splits(const std::vector<int>& labels, const DatasetConfig& cfg, std::uint64_t seed);

/// Writes volumes/<id>.pdv with sidecars and manifest.json under `out_dir`.
Manifest generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir, std::uint64_t seed);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace sploc
