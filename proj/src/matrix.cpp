#include "paa/matrix.hpp"

#include "paa/errors.hpp"

namespace paa {

Matrix::Matrix(Shape s, std::vector<double> v) : shape(s), values(std::move(v)) {
  if (shape.size() != values.size()) {
    throw ShapeError("matrix shape " + shape.to_string() + " does not match " +
                     std::to_string(values.size()) + " values");
  }
}

Matrix Matrix::from(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m;
  m.shape.rows = rows.size();
  m.shape.cols = rows.size() == 0 ? 0 : rows.begin()->size();
  for (const auto& row : rows) {
    if (row.size() != m.shape.cols) throw ShapeError("ragged matrix literal");
    m.values.insert(m.values.end(), row.begin(), row.end());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

}  // namespace paa
