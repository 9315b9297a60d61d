#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sploc/phantom.hpp"
#include "sploc/volume.hpp"

namespace sploc {

inline constexpr char kVolumeMagic[4] = {'P', 'D', 'V', 'F'};
inline constexpr std::uint32_t kVolumeFormatVersion = 1;
/// magic, version, nx, ny, nz, 3 × f32 spacing.
inline constexpr std::size_t kVolumeHeaderBytes = 32;

struct VolumeSidecar {
  GroundTruth truth;
  std::vector<std::string> label_names;
  std::uint64_t seed = 0;
};

struct LoadedVolume {
  Volume volume;
  std::optional<VolumeSidecar> sidecar;
};

/// `<volume path>.meta.json`
std::filesystem::path sidecar_path(const std::filesystem::path& volume_path);

void save_volume(const std::filesystem::path& path, const Volume& volume,
                 const std::optional<VolumeSidecar>& sidecar = std::nullopt);

LoadedVolume load_volume(const std::filesystem::path& path);

}  // namespace sploc
