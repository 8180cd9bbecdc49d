#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "geotracknet/core/errors.hpp"

namespace geotracknet::core {

// Dense row-major tensor of 64-bit floats. Only ranks 0..2 are used in
// practice (scalars, vectors, weight matrices).
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v) {
    Tensor t;
    t.shape_ = {};
    t.data_ = {v};
    return t;
  }

  static Tensor vector(std::size_t n, double fill = 0.0) {
    Tensor t;
    t.shape_ = {n};
    t.data_.assign(n, fill);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_.assign(rows * cols, fill);
    return t;
  }

  static Tensor from(std::initializer_list<double> values) {
    Tensor t;
    t.shape_ = {values.size()};
    t.data_.assign(values.begin(), values.end());
    return t;
  }

  static Tensor from(std::vector<double> values, std::vector<std::size_t> shape) {
    Tensor t;
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    if (n != values.size())
      throw ShapeError("tensor: value count does not match shape");
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return shape_.empty() && data_.size() == 1; }

  std::size_t rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? shape_[0] : 1); }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : 1; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) os << 'x';
      os << shape_[i];
    }
    os << ']';
    return os.str();
  }

 private:
  std::vector<std::size_t> shape_;  // empty = scalar
  std::vector<double> data_;
};

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace geotracknet::core
