#pragma once

#include <string>
#include <vector>

#include "sploc/nn/layers.hpp"
#include "sploc/nn/matrix.hpp"

namespace sploc::nn {

enum class CellType { kGru, kLstm };

CellType parse_cell_type(const std::string& s);
std::string to_string(CellType c);

/// One direction of a gated recurrent layer (PyTorch gate conventions).
class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(ParamStore& store, const std::string& name, std::size_t input, std::size_t hidden, CellType type);

  void init_uniform(Rng& rng);

  struct Cache {
    Matrix x;
    Matrix h;      // outputs, T × H
    Matrix gates;  // post-activation gates per step
    Matrix extra;  // GRU: W_hn h + b_hn; LSTM: cell state c
  };

  Matrix forward(const Matrix& x, Cache* cache) const;
  /// dh: gradient w.r.t. every output step. Returns dx; accumulates parameter grads.
  Matrix backward(const Cache& cache, const Matrix& dh);

  std::size_t hidden() const { return hidden_; }
  CellType type() const { return type_; }

 private:
  std::size_t gate_count() const { return type_ == CellType::kGru ? 3 : 4; }

  Dense wx_;
  Dense wh_;
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  CellType type_ = CellType::kGru;
};

/// Forward and backward passes concatenated per step: out[t] = [h_fwd[t], h_bwd[t]].
class BiRecurrent {
 public:
  BiRecurrent() = default;
  BiRecurrent(ParamStore& store, const std::string& name, std::size_t input, std::size_t hidden, CellType type);

  void init_uniform(Rng& rng);

  struct Cache {
    RecurrentCell::Cache fwd;
    RecurrentCell::Cache bwd;  // over the reversed sequence
  };

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& dout);

  std::size_t hidden() const { return fwd_.hidden(); }
  std::size_t output_size() const { return 2 * fwd_.hidden(); }

 private:
  RecurrentCell fwd_;
  RecurrentCell bwd_;
};

}  // namespace sploc::nn
