#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mop {

// Dense row-major matrix of doubles. Deliberately minimal: the numeric
// kernels want contiguous storage and explicit loops, not expression
// templates.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::span<const double> row_span(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::span<double> row_span(std::size_t i) {
    return {data.data() + i * cols, cols};
  }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool empty() const { return rows == 0 || cols == 0; }
};

inline Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows_in) {
  if (rows_in.empty()) return {};
  Matrix m(rows_in.size(), rows_in.front().size());
  for (std::size_t i = 0; i < rows_in.size(); ++i) {
    if (rows_in[i].size() != m.cols)
      throw std::invalid_argument("matrix_from_rows: ragged input");
    for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = rows_in[i][j];
  }
  return m;
}

}  // namespace mop
