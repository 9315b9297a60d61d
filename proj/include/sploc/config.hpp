#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sploc {

/// Flat INI-style settings. Keys are addressed as "section.key"; lines are
/// `key = value` under `[section]` headers, `#` and `;` start comments.
class Config {
 public:
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> raw(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  /// Applies "section.key=value" strings in order.
  void apply_overrides(const std::vector<std::string>& assignments);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws ValidationError naming the first key not in `known`.
  void check_known(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Canonical text: sections and keys sorted.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace sploc
