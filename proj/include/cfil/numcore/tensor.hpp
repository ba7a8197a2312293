#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cfil/numcore/errors.hpp"

namespace cfil::numcore {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 tensors.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw ArgumentError("Tensor: negative shape");
  }

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }

  static Tensor from_row(std::span<const double> v) {
    Tensor t(1, static_cast<int>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) t.data_[i] = v[i];
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace cfil::numcore
