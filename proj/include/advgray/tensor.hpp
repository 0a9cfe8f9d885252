#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "advgray/errors.hpp"
#include "advgray/parallel.hpp"

namespace advgray {

// Dense row-major n-d array of 64-bit reals. Value-semantic; all operations
// below are pure functions of their inputs.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
      throw DimensionError("tensor: shape " + shape_string(shape_) +
                           " does not cover " + std::to_string(data_.size()) +
                           " values");
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  // Same data, new shape; sizes must agree.
  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (count(shape) != data_.size()) {
      throw DimensionError("reshape: " + shape_string(shape_) + " -> " +
                           shape_string(shape) + " changes element count");
    }
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline std::string shape_string(const Tensor& t) {
  return Tensor::shape_string(t.shape());
}

// Matrix product with a fixed i-k-j loop order. The summation order per
// output element never changes, so results are bit-reproducible and the
// row-parallel split below cannot perturb them (rows are independent).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: need rank-2 operands, got " +
                         shape_string(a) + " and " + shape_string(b));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " +
                         shape_string(a) + " vs " + shape_string(b));
  }
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  auto rows = [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = pa[i * k + kk];
        const double* brow = pb + kk * n;
        double* crow = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
      }
    }
  };
  if (m * k * n >= 262144 && m > 1) {
    parallel_for(m, rows);
  } else {
    rows(0, m);
  }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("transpose: need rank-2 operand, got " +
                         shape_string(a));
  }
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

inline void add_inplace(Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline void scale_inplace(Tensor& a, double s) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: shape mismatch " + shape_string(a) +
                         " vs " + shape_string(b));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace advgray
