#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sploc::nn {

/// Row-major dense matrix; rows are sequence steps or samples.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Reverses row order.
Matrix reversed_rows(const Matrix& m);

std::vector<double> concat(std::initializer_list<std::span<const double>> parts);

}  // namespace sploc::nn
