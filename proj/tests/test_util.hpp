#pragma once

#include <cmath>
#include <cstdint>

#include "paa/matrix.hpp"
#include "paa/rng.hpp"

namespace paa::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.values) v = scale * rng.uniform(-1.0, 1.0);
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  return worst;
}

}  // namespace paa::testing

#include <vector>

namespace paa::testing {

inline std::vector<std::vector<double>> to_grid(const Matrix& m) {
  std::vector<std::vector<double>> g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline std::vector<double> to_vector(const Matrix& m) { return m.values; }

}  // namespace paa::testing
