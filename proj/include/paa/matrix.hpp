#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace paa {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string to_string() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

// Plain row-major matrix of doubles. Used for parameters, data and cached
// forward values; the autodiff graph lives in Tape.
struct Matrix {
  Shape shape;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape{rows, cols}, values(rows * cols, fill) {}
  Matrix(Shape s, std::vector<double> v);

  // Nested-list literal, e.g. Matrix::from({{1, 2}, {3, 4}}).
  static Matrix from(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return shape.rows; }
  std::size_t cols() const { return shape.cols; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * shape.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * shape.cols + c]; }

  bool operator==(const Matrix&) const = default;
};

}  // namespace paa
