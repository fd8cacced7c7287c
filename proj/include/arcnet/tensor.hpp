#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "arcnet/errors.hpp"

namespace arcnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array. Vectors have rank 1, matrices rank 2, scalars are
/// rank-1 with a single element.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient has been accumulated
  bool requires_grad = true;

  Tensor() = default;

  explicit Tensor(Shape s, T fill = T{0}) : shape(std::move(s)), data(shape_size(shape), fill) {
    for (auto extent : shape) {
      if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    }
  }

  static Tensor vector(std::vector<T> values) {
    Tensor t;
    t.shape = {values.size()};
    t.data = std::move(values);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values) {
    if (values.size() != rows * cols) {
      throw ShapeError("matrix data length " + std::to_string(values.size()) + " does not match " +
                       shape_string({rows, cols}));
    }
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(values);
    return t;
  }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void zero_grad() { grad.assign(data.size(), T{0}); }
};

}  // namespace arcnet
