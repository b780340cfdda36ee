// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kernels.hpp"
#include "smt/error.hpp"

namespace smt {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Dimension: return "dimension error";
    case ErrorCode::State: return "state error";
    case ErrorCode::Label: return "label error";
    case ErrorCode::Numeric: return "numeric error";
    case ErrorCode::Config: return "configuration error";
    case ErrorCode::Input: return "input error";
    case ErrorCode::Format: return "format error";
    case ErrorCode::Split: return "split error";
    case ErrorCode::Io: return "I/O error";
    case ErrorCode::Divergence: return "divergence";
  }
  return "error";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty())
    throw Error(ErrorCode::Dimension, "tensor shape must have at least one axis");
  for (auto e : shape)
    if (e == 0)
      throw Error(ErrorCode::Dimension,
                  "tensor extents must be positive, got " + shape_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (shape_size(shape_) != data_.size())
    throw Error(ErrorCode::Dimension,
                "tensor of shape " + shape_string(shape_) + " needs " +
                    std::to_string(shape_size(shape_)) + " values, got " +
                    std::to_string(data_.size()));
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data_.at(i * shape_.back() + j);
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data_.at(i * shape_.back() + j);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::reshape(Shape shape) {
  check_extents(shape);
  if (shape_size(shape) != data_.size())
    throw Error(ErrorCode::Dimension, "cannot reshape " + shape_string(shape_) +
                                          " to " + shape_string(shape));
  shape_ = std::move(shape);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace ops {

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || bias.size() != weight.extent(0) ||
      x.size() != weight.extent(1))
    throw Error(ErrorCode::Dimension,
                "dense: input " + shape_string(x.shape()) + ", weight " +
                    shape_string(weight.shape()) + ", bias " +
                    shape_string(bias.shape()) + " do not conform");
  Tensor y({weight.extent(0)});
  kernels::dense(x.data(), weight.data(), bias.data(), y.data());
  return y;
}

Tensor conv_temporal_forward(const Tensor& x, const Tensor& weight,
                             const Tensor& bias) {
  if (weight.rank() != 3 || bias.size() != weight.extent(0))
    throw Error(ErrorCode::Dimension,
                "conv_temporal: weight " + shape_string(weight.shape()) +
                    " and bias " + shape_string(bias.shape()) + " do not conform");
  const std::size_t channels = weight.extent(1);
  const std::size_t width = weight.extent(2);
  std::size_t rows = 1;
  if (x.rank() == 3) {
    rows = x.extent(0);
  } else if (x.rank() != 2) {
    throw Error(ErrorCode::Dimension,
                "conv_temporal: input must be CxT or RxCxT, got " +
                    shape_string(x.shape()));
  }
  if (x.extent(x.rank() - 2) != channels)
    throw Error(ErrorCode::Dimension,
                "conv_temporal: input " + shape_string(x.shape()) +
                    " has wrong channel count for weight " +
                    shape_string(weight.shape()));
  const std::size_t length = x.shape().back();
  if (width > length)
    throw Error(ErrorCode::Dimension,
                "conv_temporal: kernel width " + std::to_string(width) +
                    " exceeds input length " + std::to_string(length));
  kernels::ConvDims d{rows, channels, length, weight.extent(0), width};
  Shape out_shape = x.rank() == 2 ? Shape{d.filters, d.out_length()}
                                  : Shape{d.filters, rows, d.out_length()};
  Tensor y(out_shape);
  kernels::conv(d, x.data(), weight.data(), bias.data(), y.data());
  return y;
}

Tensor elu_forward(const Tensor& x) {
  Tensor y(x.shape());
  kernels::elu(x.data(), y.data());
  return y;
}

Tensor avg_pool_forward(const Tensor& x, std::size_t width) {
  const std::size_t length = x.shape().back();
  if (width == 0 || length % width != 0)
    throw Error(ErrorCode::Dimension,
                "avg_pool: width " + std::to_string(width) +
                    " does not divide length " + std::to_string(length));
  Shape out_shape = x.shape();
  out_shape.back() = length / width;
  Tensor y(out_shape);
  kernels::avg_pool(x.data(), width, y.data());
  return y;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

double softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (label >= logits.size())
    throw Error(ErrorCode::Label, "label " + std::to_string(label) +
                                      " out of range for " +
                                      std::to_string(logits.size()) + " classes");
  auto z = logits.data();
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double loss = std::log(sum) - (z[label] - mx);
  return loss < 0.0 ? 0.0 : loss;
}

}  // namespace ops

}  // namespace smt
