#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace moff {

// Dense row-major matrix of doubles. Vectors are handled as plain
// std::vector<double>; Tensor2 is for anything with two axes.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double value = 0.0)
      : rows(r), cols(c), data(r * c, value) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const Tensor2& t) {
  return all_finite(std::span<const double>(t.data));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(std::span<double> v, double a) {
  for (double& x : v) x *= a;
}

// y += x W, with x : 1 x rows, W : rows x cols, y : 1 x cols.
inline void matvec_accum(std::span<const double> x, const Tensor2& w, std::span<double> y) {
  if (x.size() != w.rows || y.size() != w.cols)
    throw std::invalid_argument("matvec_accum: shape mismatch");
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = x[i];
    const double* wr = w.data.data() + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += xi * wr[j];
  }
}

// dx += W dz, the transpose companion of matvec_accum.
inline void matvec_transpose_accum(const Tensor2& w, std::span<const double> dz,
                                   std::span<double> dx) {
  if (dz.size() != w.cols || dx.size() != w.rows)
    throw std::invalid_argument("matvec_transpose_accum: shape mismatch");
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* wr = w.data.data() + i * w.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) s += wr[j] * dz[j];
    dx[i] += s;
  }
}

// dW += outer(x, dz)
inline void outer_accum(std::span<const double> x, std::span<const double> dz, Tensor2& dw) {
  if (x.size() != dw.rows || dz.size() != dw.cols)
    throw std::invalid_argument("outer_accum: shape mismatch");
  for (std::size_t i = 0; i < dw.rows; ++i) {
    const double xi = x[i];
    double* wr = dw.data.data() + i * dw.cols;
    for (std::size_t j = 0; j < dw.cols; ++j) wr[j] += xi * dz[j];
  }
}

}  // namespace moff
