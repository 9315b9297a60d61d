#include "sploc/nn/recurrent.hpp"

#include <algorithm>
#include <cmath>

namespace sploc::nn {

CellType parse_cell_type(const std::string& s) {
  if (s == "gru") return CellType::kGru;
  if (s == "lstm") return CellType::kLstm;
  throw ValidationError("unknown recurrent cell type '" + s + "' (expected gru or lstm)");
}

std::string to_string(CellType c) { return c == CellType::kGru ? "gru" : "lstm"; }

RecurrentCell::RecurrentCell(ParamStore& store, const std::string& name, std::size_t input, std::size_t hidden,
                             CellType type)
    : input_(input), hidden_(hidden), type_(type) {
  const std::size_t g = (type == CellType::kGru ? 3 : 4) * hidden;
  wx_ = Dense(store, name + ".wx", input, g);
  wh_ = Dense(store, name + ".wh", hidden, g);
}

void RecurrentCell::init_uniform(Rng& rng) {
  // fan-in of the hidden size for both matrices, as in common GRU/LSTM defaults
  const double gain_x = std::sqrt(static_cast<double>(input_) / hidden_);
  wx_.init_uniform(rng, gain_x);
  wh_.init_uniform(rng);
}

Matrix RecurrentCell::forward(const Matrix& x, Cache* cache) const {
  if (x.rows == 0) throw ValidationError("recurrent forward on an empty sequence");
  if (x.cols != input_) throw ValidationError("recurrent input width mismatch");
  const std::size_t T = x.rows, H = hidden_, G = gate_count() * H;
  Matrix h(T, H), gates(T, G), extra(T, H);
  std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0), gx(G), gh(G);
  for (std::size_t t = 0; t < T; ++t) {
    wx_.forward(x.row(t), gx);
    wh_.forward(h_prev, gh);
    auto gt = gates.row(t);
    auto ht = h.row(t);
    if (type_ == CellType::kGru) {
      for (std::size_t k = 0; k < H; ++k) {
        const double r = sigmoid(gx[k] + gh[k]);
        const double z = sigmoid(gx[H + k] + gh[H + k]);
        const double n = std::tanh(gx[2 * H + k] + r * gh[2 * H + k]);
        gt[k] = r;
        gt[H + k] = z;
        gt[2 * H + k] = n;
        extra(t, k) = gh[2 * H + k];
        ht[k] = (1.0 - z) * n + z * h_prev[k];
      }
    } else {
      for (std::size_t k = 0; k < H; ++k) {
        const double i = sigmoid(gx[k] + gh[k]);
        const double f = sigmoid(gx[H + k] + gh[H + k]);
        const double g = std::tanh(gx[2 * H + k] + gh[2 * H + k]);
        const double o = sigmoid(gx[3 * H + k] + gh[3 * H + k]);
        const double c = f * c_prev[k] + i * g;
        gt[k] = i;
        gt[H + k] = f;
        gt[2 * H + k] = g;
        gt[3 * H + k] = o;
        extra(t, k) = c;
        ht[k] = o * std::tanh(c);
        c_prev[k] = c;
      }
    }
    std::copy(ht.begin(), ht.end(), h_prev.begin());
  }
  if (cache) {
    cache->x = x;
    cache->h = h;
    cache->gates = std::move(gates);
    cache->extra = std::move(extra);
  }
  return h;
}

Matrix RecurrentCell::backward(const Cache& cache, const Matrix& dh) {
  const std::size_t T = cache.x.rows, H = hidden_, G = gate_count() * H;
  Matrix dx(T, input_);
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dgx(G), dgh(G), dh_prev(H), zeros(H, 0.0);
  for (std::size_t step = T; step-- > 0;) {
    const auto gt = cache.gates.row(step);
    const std::span<const double> h_prev = step > 0 ? cache.h.row(step - 1) : std::span<const double>(zeros);
    std::vector<double> dht(H);
    for (std::size_t k = 0; k < H; ++k) dht[k] = dh(step, k) + dh_next[k];
    if (type_ == CellType::kGru) {
      for (std::size_t k = 0; k < H; ++k) {
        const double r = gt[k], z = gt[H + k], n = gt[2 * H + k], ghn = cache.extra(step, k);
        const double dn = dht[k] * (1.0 - z);
        const double dz = dht[k] * (h_prev[k] - n);
        const double dan = dn * (1.0 - n * n);
        const double dr = dan * ghn;
        dgx[k] = dr * r * (1.0 - r);
        dgx[H + k] = dz * z * (1.0 - z);
        dgx[2 * H + k] = dan;
        dgh[k] = dgx[k];
        dgh[H + k] = dgx[H + k];
        dgh[2 * H + k] = dan * r;
        dh_next[k] = dht[k] * z;
      }
    } else {
      for (std::size_t k = 0; k < H; ++k) {
        const double i = gt[k], f = gt[H + k], g = gt[2 * H + k], o = gt[3 * H + k];
        const double c = cache.extra(step, k);
        const double c_prev = step > 0 ? cache.extra(step - 1, k) : 0.0;
        const double tc = std::tanh(c);
        const double dc = dc_next[k] + dht[k] * o * (1.0 - tc * tc);
        dgx[k] = dc * g * i * (1.0 - i);
        dgx[H + k] = dc * c_prev * f * (1.0 - f);
        dgx[2 * H + k] = dc * i * (1.0 - g * g);
        dgx[3 * H + k] = dht[k] * tc * o * (1.0 - o);
        dc_next[k] = dc * f;
        dh_next[k] = 0.0;
      }
      std::copy(dgx.begin(), dgx.end(), dgh.begin());
    }
    wx_.backward(cache.x.row(step), dgx, dx.row(step));
    wh_.backward(h_prev, dgh, dh_prev);
    for (std::size_t k = 0; k < H; ++k) dh_next[k] += dh_prev[k];
  }
  return dx;
}

BiRecurrent::BiRecurrent(ParamStore& store, const std::string& name, std::size_t input, std::size_t hidden,
                         CellType type)
    : fwd_(store, name + ".fwd", input, hidden, type), bwd_(store, name + ".bwd", input, hidden, type) {}

void BiRecurrent::init_uniform(Rng& rng) {
  fwd_.init_uniform(rng);
  bwd_.init_uniform(rng);
}

Matrix BiRecurrent::forward(const Matrix& x, Cache* cache) const {
  const Matrix hf = fwd_.forward(x, cache ? &cache->fwd : nullptr);
  const Matrix hb_rev = bwd_.forward(reversed_rows(x), cache ? &cache->bwd : nullptr);
  const std::size_t T = x.rows, H = hidden();
  Matrix out(T, 2 * H);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < H; ++k) {
      out(t, k) = hf(t, k);
      out(t, H + k) = hb_rev(T - 1 - t, k);
    }
  }
  return out;
}

Matrix BiRecurrent::backward(const Cache& cache, const Matrix& dout) {
  const std::size_t T = dout.rows, H = hidden();
  Matrix dhf(T, H), dhb_rev(T, H);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < H; ++k) {
      dhf(t, k) = dout(t, k);
      dhb_rev(T - 1 - t, k) = dout(t, H + k);
    }
  }
  Matrix dx = fwd_.backward(cache.fwd, dhf);
  const Matrix dx_rev = bwd_.backward(cache.bwd, dhb_rev);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < dx.cols; ++j) dx(t, j) += dx_rev(T - 1 - t, j);
  }
  return dx;
}

}  // namespace sploc::nn
