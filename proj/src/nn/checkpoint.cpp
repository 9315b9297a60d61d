#include "sploc/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sploc/common.hpp"

namespace sploc::nn {

namespace {

constexpr const char* kFormat = "sploc-checkpoint";

struct Header {
  nlohmann::json json;
  std::size_t data_offset;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1u << 26)) throw FormatError("bad checkpoint header length in " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("checkpoint header truncated in " + path.string());
  Header h{nlohmann::json::parse(text, nullptr, false), sizeof(len) + len};
  if (h.json.is_discarded() || h.json.value("format", "") != kFormat) {
    throw FormatError("not a sploc checkpoint: " + path.string());
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const nlohmann::json& meta) {
  static_assert(std::endian::native == std::endian::little);
  nlohmann::ordered_json header;
  header["format"] = kFormat;
  header["version"] = 1;
  header["params"] = nlohmann::ordered_json::array();
  for (const auto& p : store.params()) header["params"].push_back({{"name", p.name}, {"shape", p.shape}});
  header["meta"] = meta;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : store.params()) {
    out.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  }
}

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_header(in, path).json.value("meta", nlohmann::json::object());
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const Header h = read_header(in, path);
  const auto& params = h.json.at("params");
  if (params.size() != store.params().size()) {
    throw FormatError("checkpoint has " + std::to_string(params.size()) + " tensors, model expects " +
                      std::to_string(store.params().size()));
  }
  std::size_t i = 0;
  for (auto& p : store.params()) {
    const auto& entry = params.at(i++);
    if (entry.at("name").get<std::string>() != p.name ||
        entry.at("shape").get<std::vector<std::size_t>>() != p.shape) {
      throw FormatError("checkpoint tensor mismatch at " + p.name);
    }
    in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint payload truncated at " + p.name);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint " + path.string());
  return h.json.value("meta", nlohmann::json::object());
}

}  // namespace sploc::nn
