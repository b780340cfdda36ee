// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace smt {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of tags.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t s = mix_seed(base);
  for (auto t : tags) s = mix_seed(s ^ mix_seed(t + 0x632BE59BD9B4E019ull));
  return s;
}

namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kSplit = 3;
inline constexpr std::uint64_t kTrain = 4;
inline constexpr std::uint64_t kSaliency = 5;
inline constexpr std::uint64_t kShuffle = 6;
inline constexpr std::uint64_t kLth = 7;
}  // namespace stream

}  // namespace smt
