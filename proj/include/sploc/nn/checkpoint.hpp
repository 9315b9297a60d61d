#pragma once

#include <filesystem>

#include <json.hpp>

#include "sploc/nn/param_store.hpp"

namespace sploc::nn {

/// Layout: u64 little-endian header length, UTF-8 JSON header
/// {"format": "sploc-checkpoint", "version": 1, "params": [{"name", "shape"}...], "meta": {...}},
/// then every parameter's values as f64 little-endian in header order.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const nlohmann::json& meta);

/// Reads only the header's meta object; used to size a model before loading values.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& path);

/// Fills an already-built store. Names and shapes must match exactly. Returns meta.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& store);

}  // namespace sploc::nn
