#include "sploc/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace sploc::nn {

namespace {
void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ValidationError(std::string("shape mismatch in ") + what);
}
}  // namespace

Dense::Dense(ParamStore& store, const std::string& name, std::size_t in, std::size_t out)
    : w_(&store.add(name + ".weight", {out, in})), b_(&store.add(name + ".bias", {out})), in_(in), out_(out) {}

void Dense::init_uniform(Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(in_));
  for (auto& w : w_->value) w = rng.uniform(-bound, bound);
  std::fill(b_->value.begin(), b_->value.end(), 0.0);
}

void Dense::init_zero() {
  std::fill(w_->value.begin(), w_->value.end(), 0.0);
  std::fill(b_->value.begin(), b_->value.end(), 0.0);
}

void Dense::forward(std::span<const double> x, std::span<double> y) const {
  check_same(x.size(), in_, "Dense::forward input");
  check_same(y.size(), out_, "Dense::forward output");
  const double* w = w_->value.data();
  for (std::size_t o = 0; o < out_; ++o) {
    double acc = b_->value[o];
    const double* row = w + o * in_;
    for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

std::vector<double> Dense::forward(std::span<const double> x) const {
  std::vector<double> y(out_);
  forward(x, y);
  return y;
}

void Dense::backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  check_same(x.size(), in_, "Dense::backward input");
  check_same(dy.size(), out_, "Dense::backward grad");
  const double* w = w_->value.data();
  double* gw = w_->grad.data();
  for (std::size_t o = 0; o < out_; ++o) {
    const double g = dy[o];
    b_->grad[o] += g;
    if (g == 0.0) continue;
    double* grow = gw + o * in_;
    for (std::size_t i = 0; i < in_; ++i) grow[i] += g * x[i];
  }
  if (dx.empty()) return;
  check_same(dx.size(), in_, "Dense::backward dx");
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t o = 0; o < out_; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    const double* row = w + o * in_;
    for (std::size_t i = 0; i < in_; ++i) dx[i] += g * row[i];
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void relu_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void sigmoid_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
}

void sigmoid_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx) {
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
}

void tanh_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx) {
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw ValidationError("cross-entropy label out of range");
  }
  CrossEntropy ce;
  ce.probs = softmax(logits);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - mx);
  ce.loss = -(logits[label] - mx - std::log(lse));
  ce.dlogits = ce.probs;
  ce.dlogits[label] -= 1.0;
  return ce;
}

}  // namespace sploc::nn
