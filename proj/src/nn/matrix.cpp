#include "sploc/nn/matrix.hpp"

#include <algorithm>

namespace sploc::nn {

Matrix reversed_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::copy(m.row(i).begin(), m.row(i).end(), out.row(m.rows - 1 - i).begin());
  }
  return out;
}

std::vector<double> concat(std::initializer_list<std::span<const double>> parts) {
  std::vector<double> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace sploc::nn
