// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "kernels.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

namespace smt::kernels {

namespace {

// Two-lane vectors map onto the baseline SIMD unit of every 64-bit target.
// Every lane accumulates its own terms in plain sequential order, so the
// blocked loops below produce the same bits as the naive reference loops.
typedef double Lanes __attribute__((vector_size(16)));

inline Lanes load(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, Lanes v) { std::memcpy(p, &v, sizeof v); }

inline Lanes splat(double k) { return Lanes{k, k}; }

// Dot product with eight interleaved partial sums. The association of the
// final combination is fixed in source, independent of the vector ISA.
double dot(const double* a, const double* b, std::size_t n) {
  Lanes s0{}, s1{}, s2{}, s3{};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += load(a + i) * load(b + i);
    s1 += load(a + i + 2) * load(b + i + 2);
    s2 += load(a + i + 4) * load(b + i + 4);
    s3 += load(a + i + 6) * load(b + i + 6);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  const Lanes s = (s0 + s1) + (s2 + s3);
  return (s[0] + s[1]) + tail;
}

void axpy(double k, const double* __restrict x, double* __restrict y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += k * x[i];
}

// Register block: 16 consecutive positions as eight two-lane accumulators.
constexpr std::size_t kBlock = 16;

struct Block {
  Lanes v[8];

  void load_from(const double* p) {
    for (std::size_t j = 0; j < 8; ++j) v[j] = load(p + 2 * j);
  }
  void store_to(double* p) const {
    for (std::size_t j = 0; j < 8; ++j) store(p + 2 * j, v[j]);
  }
  void add_scaled(double k, const double* p) {
    const Lanes kk = splat(k);
    for (std::size_t j = 0; j < 8; ++j) v[j] += kk * load(p + 2 * j);
  }
};

// expm1 for x <= 0: x = k ln2 + r with |r| <= ln2/2, then
// expm1(x) = 2^k expm1(r) + (2^k - 1). The polynomial is the Taylor series
// of expm1 through r^13, below half an ulp for |r| <= ln2/2.
// Written on two-lane vectors so the selects stay branch-free.
typedef std::int64_t Ints __attribute__((vector_size(16)));

inline Lanes expm1_le0(Lanes x) {
  const Lanes shift = splat(6755399441055744.0);  // 1.5 * 2^52
  const Lanes floor_x = splat(-40.0);              // expm1(-40) rounds to -1
  const Lanes xc = x < floor_x ? floor_x : x;
  const Lanes shifted = xc * splat(1.4426950408889634) + shift;
  const Lanes kd = shifted - shift;
  const Ints k = std::bit_cast<Ints>(shifted) - std::bit_cast<Ints>(shift);
  const Lanes r = (xc - kd * splat(6.93147180369123816490e-01)) -
                  kd * splat(1.90821492927058770002e-10);
  Lanes p = splat(1.0 / 6227020800.0);  // 1/13!
  p = p * r + splat(1.0 / 479001600.0);
  p = p * r + splat(1.0 / 39916800.0);
  p = p * r + splat(1.0 / 3628800.0);
  p = p * r + splat(1.0 / 362880.0);
  p = p * r + splat(1.0 / 40320.0);
  p = p * r + splat(1.0 / 5040.0);
  p = p * r + splat(1.0 / 720.0);
  p = p * r + splat(1.0 / 120.0);
  p = p * r + splat(1.0 / 24.0);
  p = p * r + splat(1.0 / 6.0);
  p = p * r + splat(0.5);
  const Lanes em1 = r + (r * r) * p;
  const Lanes scale = std::bit_cast<Lanes>((k + 1023) << 52);
  return scale * em1 + (scale - splat(1.0));
}

inline Lanes elu_lanes(Lanes v) {
  const Lanes zero{};
  const Lanes neg = expm1_le0(v > zero ? zero : v);
  const Lanes out = v > zero ? v : neg;
  return v != v ? v : out;  // NaN passes through
}

}  // namespace

double expm1_nonpositive(double x) { return expm1_le0(splat(x))[0]; }

void elu(std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) store(y.data() + i, elu_lanes(load(x.data() + i)));
  if (i < n) y[i] = elu_lanes(Lanes{x[i], 0.0})[0];
}

void elu_backward(std::span<const double> y, std::span<const double> gy,
                  std::span<double> gx) {
  const std::size_t n = y.size();
  const Lanes zero{}, one = splat(1.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const Lanes v = load(y.data() + i);
    const Lanes d = v > zero ? one : v + one;  // lane select, no branch
    store(gx.data() + i, load(gx.data() + i) + load(gy.data() + i) * d);
  }
  if (i < n) gx[i] += gy[i] * (y[i] > 0.0 ? 1.0 : y[i] + 1.0);
}

void dense(std::span<const double> x, std::span<const double> w,
           std::span<const double> b, std::span<double> y) {
  const std::size_t n_in = x.size();
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double* row = w.data() + j * n_in;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
    y[j] = acc + b[j];
  }
}

void dense_backward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx,
                    std::span<double> gw, std::span<double> gb) {
  const std::size_t n_in = x.size();
  for (std::size_t j = 0; j < gy.size(); ++j) {
    const double g = gy[j];
    if (!gb.empty()) gb[j] += g;
    if (!gw.empty()) axpy(g, x.data(), gw.data() + j * n_in, n_in);
    if (!gx.empty()) axpy(g, w.data() + j * n_in, gx.data(), n_in);
  }
}

void conv(const ConvDims& d, std::span<const double> x,
          std::span<const double> w, std::span<const double> b,
          std::span<double> y) {
  const std::size_t L = d.out_length();
  for (std::size_t f = 0; f < d.filters; ++f) {
    const double* kf = w.data() + f * d.channels * d.width;
    const double bias = b[f];
    for (std::size_t r = 0; r < d.rows; ++r) {
      const double* xr = x.data() + r * d.channels * d.length;
      double* out = y.data() + (f * d.rows + r) * L;
      std::size_t t0 = 0;
      for (; t0 + kBlock <= L; t0 += kBlock) {
        Block acc{};
        for (std::size_t c = 0; c < d.channels; ++c) {
          const double* xs = xr + c * d.length + t0;
          const double* kc = kf + c * d.width;
          for (std::size_t tau = 0; tau < d.width; ++tau)
            // A zero tap adds exact zeros for finite inputs; pruned weights
            // make this the common case in sparse models.
            if (kc[tau] != 0.0) acc.add_scaled(kc[tau], xs + tau);
        }
        for (auto& v : acc.v) v += splat(bias);
        acc.store_to(out + t0);
      }
      if (t0 < L) {
        const std::size_t m = L - t0;
        double acc[kBlock] = {};
        for (std::size_t c = 0; c < d.channels; ++c) {
          const double* xs = xr + c * d.length + t0;
          const double* kc = kf + c * d.width;
          for (std::size_t tau = 0; tau < d.width; ++tau) {
            const double k = kc[tau];
            if (k == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) acc[j] += k * xs[tau + j];
          }
        }
        for (std::size_t j = 0; j < m; ++j) out[t0 + j] = acc[j] + bias;
      }
    }
  }
}

void conv_backward(const ConvDims& d, std::span<const double> x,
                   std::span<const double> w, std::span<const double> gy,
                   std::span<double> gx, std::span<double> gw,
                   std::span<double> gb, const std::uint8_t* gw_mask) {
  const std::size_t L = d.out_length();
  for (std::size_t f = 0; f < d.filters; ++f) {
    for (std::size_t r = 0; r < d.rows; ++r) {
      const double* g = gy.data() + (f * d.rows + r) * L;
      if (!gb.empty()) {
        double acc = 0.0;
        for (std::size_t t = 0; t < L; ++t) acc += g[t];
        gb[f] += acc;
      }
      if (gw.empty()) continue;
      for (std::size_t c = 0; c < d.channels; ++c) {
        const double* xrow = x.data() + (r * d.channels + c) * d.length;
        const std::size_t k0 = (f * d.channels + c) * d.width;
        for (std::size_t tau = 0; tau < d.width; ++tau)
          if (!gw_mask || gw_mask[k0 + tau]) gw[k0 + tau] += dot(g, xrow + tau, L);
      }
    }
  }
  if (gx.empty()) return;
  // gx[s] += w[tau] * gy[s - tau]; every element receives its terms in
  // (filter, tap) order. Blocks whose taps all stay in range are
  // vectorized; edge positions take the bounds-checked path.
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      double* gxrow = gx.data() + (r * d.channels + c) * d.length;
      auto scalar_at = [&](std::size_t s) {
        double acc = gxrow[s];
        for (std::size_t f = 0; f < d.filters; ++f) {
          const double* g = gy.data() + (f * d.rows + r) * L;
          const double* kern = w.data() + (f * d.channels + c) * d.width;
          for (std::size_t tau = 0; tau < d.width; ++tau)
            if (s >= tau && s - tau < L) acc += kern[tau] * g[s - tau];
        }
        gxrow[s] = acc;
      };
      std::size_t s = 0;
      for (; s + 1 < d.width && s < d.length; ++s) scalar_at(s);
      for (; s + kBlock <= L; s += kBlock) {
        Block acc;
        acc.load_from(gxrow + s);
        for (std::size_t f = 0; f < d.filters; ++f) {
          const double* g = gy.data() + (f * d.rows + r) * L;
          const double* kern = w.data() + (f * d.channels + c) * d.width;
          for (std::size_t tau = 0; tau < d.width; ++tau)
            if (kern[tau] != 0.0) acc.add_scaled(kern[tau], g + s - tau);
        }
        acc.store_to(gxrow + s);
      }
      for (; s < d.length; ++s) scalar_at(s);
    }
  }
}

void avg_pool(std::span<const double> x, std::size_t width, std::span<double> y) {
  const double scale = 1.0 / static_cast<double>(width);
  for (std::size_t o = 0; o < y.size(); ++o) {
    const double* w = x.data() + o * width;
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) acc += w[j];
    y[o] = acc * scale;
  }
}

}  // namespace smt::kernels
