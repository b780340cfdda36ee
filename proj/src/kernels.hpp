// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Raw loops behind the tensor ops. Summation order is fixed so results are
// reproducible bit for bit.
namespace smt::kernels {

struct ConvDims {
  std::size_t rows;      // R
  std::size_t channels;  // C
  std::size_t length;    // T
  std::size_t filters;   // F
  std::size_t width;     // k
  std::size_t out_length() const { return length - width + 1; }
};

void dense(std::span<const double> x, std::span<const double> w,
           std::span<const double> b, std::span<double> y);
void dense_backward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx,
                    std::span<double> gw, std::span<double> gb);

// x: R x C x T, w: F x C x k, y: F x R x (T-k+1). When gw_mask is given,
// weight gradients are only accumulated where it is nonzero.
void conv(const ConvDims& d, std::span<const double> x,
          std::span<const double> w, std::span<const double> b,
          std::span<double> y);
void conv_backward(const ConvDims& d, std::span<const double> x,
                   std::span<const double> w, std::span<const double> gy,
                   std::span<double> gx, std::span<double> gw,
                   std::span<double> gb, const std::uint8_t* gw_mask = nullptr);

// y = x for x > 0, expm1(x) otherwise. Accurate to a few ulp.
void elu(std::span<const double> x, std::span<double> y);
// gx += gy * dy/dx, using the forward output y.
void elu_backward(std::span<const double> y, std::span<const double> gy,
                  std::span<double> gx);

// Non-overlapping windows of `width` over contiguous rows: y[o] = mean(x[o*width ...]).
void avg_pool(std::span<const double> x, std::size_t width, std::span<double> y);

// expm1 restricted to x <= 0, in a form the compiler can vectorize.
double expm1_nonpositive(double x);

}  // namespace smt::kernels
