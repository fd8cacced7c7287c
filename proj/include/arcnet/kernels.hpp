#pragma once

// Dense linear-algebra kernels used by the expression graph.
//
// `serial` holds the reference loops. `omp` holds OpenMP versions that split
// work over output elements only, so every output is reduced in the same
// order as the reference and results are bitwise identical.

#include <cstddef>
#include <span>

#include <omp.h>

namespace arcnet::kernels {

namespace serial {

/// y = W x, W is rows x cols.
template <typename T>
void matvec(std::span<const T> w, std::size_t rows, std::size_t cols, std::span<const T> x,
            std::span<T> y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const T* row = w.data() + i * cols;
    T acc{0};
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

/// y = W^T x, W is rows x cols, x has length rows.
template <typename T>
void matvec_t(std::span<const T> w, std::size_t rows, std::size_t cols, std::span<const T> x,
              std::span<T> y) {
  for (std::size_t j = 0; j < cols; ++j) {
    T acc{0};
    for (std::size_t i = 0; i < rows; ++i) acc += w[i * cols + j] * x[i];
    y[j] = acc;
  }
}

/// G += a b^T, G is rows x cols.
template <typename T>
void add_outer(std::span<T> g, std::size_t rows, std::size_t cols, std::span<const T> a,
               std::span<const T> b) {
  for (std::size_t i = 0; i < rows; ++i) {
    T* row = g.data() + i * cols;
    const T ai = a[i];
    for (std::size_t j = 0; j < cols; ++j) row[j] += ai * b[j];
  }
}

}  // namespace serial

namespace omp {

template <typename T>
void matvec(std::span<const T> w, std::size_t rows, std::size_t cols, std::span<const T> x,
            std::span<T> y) {
  const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const T* row = w.data() + static_cast<std::size_t>(i) * cols;
    T acc{0};
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[static_cast<std::size_t>(i)] = acc;
  }
}

template <typename T>
void matvec_t(std::span<const T> w, std::size_t rows, std::size_t cols, std::span<const T> x,
              std::span<T> y) {
  const auto n = static_cast<long>(cols);
#pragma omp parallel for schedule(static)
  for (long j = 0; j < n; ++j) {
    T acc{0};
    for (std::size_t i = 0; i < rows; ++i) acc += w[i * cols + static_cast<std::size_t>(j)] * x[i];
    y[static_cast<std::size_t>(j)] = acc;
  }
}

template <typename T>
void add_outer(std::span<T> g, std::size_t rows, std::size_t cols, std::span<const T> a,
               std::span<const T> b) {
  const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    T* row = g.data() + static_cast<std::size_t>(i) * cols;
    const T ai = a[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < cols; ++j) row[j] += ai * b[j];
  }
}

}  // namespace omp

/// Below this many multiply-adds the thread fork costs more than it saves.
inline constexpr std::size_t kParallelMinWork = std::size_t{1} << 16;

inline bool use_parallel(std::size_t rows, std::size_t cols) {
  return rows * cols >= kParallelMinWork && !omp_in_parallel() && omp_get_max_threads() > 1;
}

template <typename T>
void matvec(std::span<const T> w, std::size_t rows, std::size_t cols, std::span<const T> x,
            std::span<T> y) {
  if (use_parallel(rows, cols)) {
    omp::matvec(w, rows, cols, x, y);
  } else {
    serial::matvec(w, rows, cols, x, y);
  }
}

template <typename T>
void matvec_t(std::span<const T> w, std::size_t rows, std::size_t cols, std::span<const T> x,
              std::span<T> y) {
  if (use_parallel(rows, cols)) {
    omp::matvec_t(w, rows, cols, x, y);
  } else {
    serial::matvec_t(w, rows, cols, x, y);
  }
}

template <typename T>
void add_outer(std::span<T> g, std::size_t rows, std::size_t cols, std::span<const T> a,
               std::span<const T> b) {
  if (use_parallel(rows, cols)) {
    omp::add_outer(g, rows, cols, a, b);
  } else {
    serial::add_outer(g, rows, cols, a, b);
  }
}

}  // namespace arcnet::kernels
