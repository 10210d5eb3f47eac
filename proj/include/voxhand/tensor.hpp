#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "voxhand/common.hpp"

namespace voxhand {

// Dense N-dimensional real array, row-major (last extent fastest). Rank is
// at most 5; the full-rank layout is (batch, channel, depth, height, width).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 5)
      throw ShapeMismatch("Tensor: rank must be 1..5, got " + std::to_string(shape_.size()));
    std::size_t n = 1;
    for (int e : shape_) {
      if (e < 0) throw ShapeMismatch("Tensor: negative extent");
      n *= static_cast<std::size_t>(e);
    }
    data_.assign(n, 0.0);
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[axis]; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t n, std::size_t c, std::size_t d, std::size_t h, std::size_t w) {
    return data_[offset5(n, c, d, h, w)];
  }
  double at(std::size_t n, std::size_t c, std::size_t d, std::size_t h, std::size_t w) const {
    return data_[offset5(n, c, d, h, w)];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  // Same data, new shape; element count must match.
  Tensor reshaped(std::vector<int> shape) const {
    Tensor t(std::move(shape));
    if (t.size() != size())
      throw ShapeMismatch("reshape: element count " + std::to_string(size()) +
                          " != " + std::to_string(t.size()));
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + ")";
  }

 private:
  std::size_t offset5(std::size_t n, std::size_t c, std::size_t d, std::size_t h,
                      std::size_t w) const {
    if (shape_.size() != 5)
      throw ShapeMismatch("Tensor::at needs rank 5, have " + shape_string());
    return (((n * shape_[1] + c) * shape_[2] + d) * shape_[3] + h) * shape_[4] + w;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace voxhand
