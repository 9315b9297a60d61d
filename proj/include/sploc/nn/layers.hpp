#pragma once

#include <span>
#include <string>
#include <vector>

#include "sploc/nn/param_store.hpp"
#include "sploc/rng.hpp"

namespace sploc::nn {

/// y = W x + b with W stored [out][in]. Forward is const and cache-free; the
/// caller keeps the input for backward.
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& store, const std::string& name, std::size_t in, std::size_t out);

  /// Weights ~ U(-1/sqrt(in), 1/sqrt(in)) scaled by `gain`; bias zero.
  void init_uniform(Rng& rng, double gain = 1.0);
  void init_zero();

  void forward(std::span<const double> x, std::span<double> y) const;
  std::vector<double> forward(std::span<const double> x) const;

  /// Accumulates dW, db; writes dx when it is non-empty.
  void backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  Parameter& weight() { return *w_; }
  Parameter& bias() { return *b_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

double sigmoid(double x);

void relu_forward(std::span<const double> x, std::span<double> y);
/// dx = dy * [x > 0]; `x` is the pre-activation.
void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);
void sigmoid_forward(std::span<const double> x, std::span<double> y);
/// `y` is the forward output.
void sigmoid_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx);
void tanh_forward(std::span<const double> x, std::span<double> y);
void tanh_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx);

std::vector<double> softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss;
  std::vector<double> probs;
  std::vector<double> dlogits;  // probs - onehot
};

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label);

}  // namespace sploc::nn
