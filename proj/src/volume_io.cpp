#include "sploc/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace sploc {

namespace {

static_assert(std::endian::native == std::endian::little, "volume I/O assumes a little-endian host");

template <typename T>
void put(std::vector<char>& buf, T value) {
  const std::size_t at = buf.size();
  buf.resize(at + sizeof(T));
  std::memcpy(buf.data() + at, &value, sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& volume_path) {
  return std::filesystem::path(volume_path.string() + ".meta.json");
}

void save_volume(const std::filesystem::path& path, const Volume& volume, const std::optional<VolumeSidecar>& sidecar) {
  std::vector<char> buf;
  buf.reserve(kVolumeHeaderBytes + volume.size() * sizeof(float));
  buf.resize(4);
  std::memcpy(buf.data(), kVolumeMagic, 4);
  put<std::uint32_t>(buf, kVolumeFormatVersion);
  for (int d = 0; d < 3; ++d) put<std::uint32_t>(buf, static_cast<std::uint32_t>(volume.dims()[d]));
  for (int d = 0; d < 3; ++d) put<float>(buf, static_cast<float>(volume.spacing()[d]));
  for (float v : volume.data()) put<float>(buf, v);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

  const auto meta_path = sidecar_path(path);
  if (sidecar) {
    nlohmann::ordered_json j;
    j["plane"] = {{"r", sidecar->truth.plane.r}, {"eta", sidecar->truth.plane.eta}, {"theta", sidecar->truth.plane.theta}};
    j["label"] = sidecar->truth.label;
    j["label_names"] = sidecar->label_names;
    j["seed"] = sidecar->seed;
    std::ofstream meta(meta_path);
    meta << j.dump(2) << '\n';
  } else if (std::filesystem::exists(meta_path)) {
    std::filesystem::remove(meta_path);
  }
}

LoadedVolume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open volume " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kVolumeHeaderBytes) throw FormatError("volume header truncated: " + path.string());
  if (std::memcmp(buf.data(), kVolumeMagic, 4) != 0) throw FormatError("bad volume magic in " + path.string());
  const auto version = get<std::uint32_t>(buf, 4);
  if (version != kVolumeFormatVersion) {
    throw FormatError("unsupported volume format version " + std::to_string(version));
  }
  std::array<int, 3> dims{};
  Vec3 spacing{};
  std::size_t count = 1;
  for (int d = 0; d < 3; ++d) {
    const auto n = get<std::uint32_t>(buf, 8 + 4 * d);
    if (n == 0 || n > (1u << 16)) throw FormatError("implausible volume dimension " + std::to_string(n));
    dims[d] = static_cast<int>(n);
    count *= n;
    spacing[d] = get<float>(buf, 20 + 4 * d);
  }
  const std::size_t payload = buf.size() - kVolumeHeaderBytes;
  if (payload < count * sizeof(float)) {
    throw FormatError("volume payload truncated: expected " + std::to_string(count) + " floats, found " +
                      std::to_string(payload / sizeof(float)));
  }
  if (payload > count * sizeof(float)) throw FormatError("volume payload longer than header dims");
  std::vector<float> data(count);
  std::memcpy(data.data(), buf.data() + kVolumeHeaderBytes, count * sizeof(float));
  LoadedVolume result{Volume(dims, spacing, std::move(data)), std::nullopt};

  const auto meta_path = sidecar_path(path);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream meta(meta_path);
    nlohmann::json j;
    try {
      meta >> j;
      VolumeSidecar sc;
      sc.truth.plane = {j.at("plane").at("r").get<double>(), j.at("plane").at("eta").get<double>(),
                        j.at("plane").at("theta").get<double>()};
      sc.truth.label = j.at("label").get<int>();
      sc.label_names = j.at("label_names").get<std::vector<std::string>>();
      sc.seed = j.at("seed").get<std::uint64_t>();
      if (sc.truth.label < 0 || sc.truth.label >= static_cast<int>(sc.label_names.size())) {
        throw FormatError("sidecar label outside label_names");
      }
      result.sidecar = std::move(sc);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed sidecar " + meta_path.string() + ": " + e.what());
    }
  }
  return result;
}

}  // namespace sploc
