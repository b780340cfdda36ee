// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0
//
// Small models and datasets that keep the suites fast.

#pragma once

#include "smt/data.hpp"
#include "smt/model.hpp"
#include "smt/training.hpp"

namespace smt::testing {

inline ArchConfig small_arch() {
  ArchConfig a;
  a.channels = 4;
  a.samples = 32;
  a.temporal_filters = 2;
  a.temporal_kernel = 5;
  a.spatial_filters = 3;
  a.pool_width = 4;
  a.embedding = 8;
  a.head_hidden = 4;
  a.classes = 3;
  return a;
}

inline SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig s;
  s.channels = 4;
  s.samples = 32;
  s.trials_per_class = 10;
  s.noise_std = 0.5;
  s.seed = seed;
  return s;
}

inline TrainingData small_data(std::uint64_t seed) {
  auto [mi, me] = generate_synthetic(small_synth(seed));
  auto a = split(zscore(mi), 0.8, seed);
  auto b = split(zscore(me), 0.8, seed + 1);
  return {{std::move(a.train), std::move(a.validation)},
          {std::move(b.train), std::move(b.validation)}};
}

}  // namespace smt::testing
