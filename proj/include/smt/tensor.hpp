// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace smt {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  /// Same data, new extents. Total size must not change.
  Tensor reshaped(Shape shape) const;
  void reshape(Shape shape);

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

namespace ops {

// y[j] = sum_i W[j,i] x[i] + b[j]
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Valid cross-correlation along the last axis, stride 1.
//   weight: F x C x k
//   x:      C x T        -> F x (T-k+1)
//   x:      R x C x T    -> F x R x (T-k+1)   (kernels shared across rows)
Tensor conv_temporal_forward(const Tensor& x, const Tensor& weight,
                             const Tensor& bias);

Tensor elu_forward(const Tensor& x);

// Non-overlapping mean over windows of `width` along the last axis.
Tensor avg_pool_forward(const Tensor& x, std::size_t width);

double softmax_cross_entropy(const Tensor& logits, std::size_t label);
std::vector<double> softmax(std::span<const double> logits);

}  // namespace ops

}  // namespace smt
