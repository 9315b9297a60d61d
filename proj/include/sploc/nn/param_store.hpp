#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace sploc::nn {

struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> m;  // AdamW first moment
  std::vector<double> v;  // AdamW second moment
  bool trainable = true;

  std::size_t size() const { return value.size(); }
};

/// Named parameters with paired gradients and optimizer state. Parameters
/// live in a deque, so references handed to layers stay valid as the store
/// grows. A store is owned by exactly one model and is not copyable.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Parameter& add(const std::string& name, std::vector<std::size_t> shape);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& get(const std::string& name);

  std::deque<Parameter>& params() { return params_; }
  const std::deque<Parameter>& params() const { return params_; }

  void zero_grad();
  std::size_t count() const;

  /// All trainable values, in registration order.
  std::vector<double> values() const;
  void set_values(const std::vector<double>& flat);
  std::vector<double> grads() const;

  /// FNV-1a over names, shapes and value bytes.
  std::uint64_t hash() const;

  long step = 0;  // optimizer step count

 private:
  std::deque<Parameter> params_;
};

}  // namespace sploc::nn
