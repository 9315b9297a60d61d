#include "sploc/nn/param_store.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <string_view>

#include "sploc/common.hpp"

namespace sploc::nn {

Parameter& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  if (find(name)) throw ValidationError("duplicate parameter name " + name);
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  Parameter p;
  p.name = name;
  p.shape = std::move(shape);
  p.value.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  p.m.assign(n, 0.0);
  p.v.assign(n, 0.0);
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter* ParamStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter& ParamStore::get(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw ValidationError("unknown parameter " + name);
  return *p;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::vector<double> ParamStore::values() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& p : params_) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

void ParamStore::set_values(const std::vector<double>& flat) {
  if (flat.size() != count()) throw ValidationError("set_values: size mismatch");
  std::size_t off = 0;
  for (auto& p : params_) {
    std::copy(flat.begin() + off, flat.begin() + off + p.size(), p.value.begin());
    off += p.size();
  }
}

std::vector<double> ParamStore::grads() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& p : params_) out.insert(out.end(), p.grad.begin(), p.grad.end());
  return out;
}

std::uint64_t ParamStore::hash() const {
  std::uint64_t h = fnv1a("paramstore");
  for (const auto& p : params_) {
    h = fnv1a(p.name, h);
    for (auto s : p.shape) h = fnv1a(std::string_view(reinterpret_cast<const char*>(&s), sizeof(s)), h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(double)), h);
  }
  return h;
}

}  // namespace sploc::nn
