// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smt/tensor.hpp"

namespace smt {

enum class Task : std::uint8_t { MI = 0, ME = 1 };

const char* task_name(Task task) noexcept;
Task parse_task(const std::string& name);

struct LabeledTrial {
  Tensor x;           // channels x samples
  std::size_t y = 0;  // class index
};

struct TrialDataset {
  Task task = Task::MI;
  std::vector<LabeledTrial> trials;
  std::vector<std::string> class_names;
  std::optional<double> sampling_rate_hz;

  std::size_t size() const noexcept { return trials.size(); }
  std::size_t channels() const;
  std::size_t samples() const;
  std::size_t classes() const noexcept { return class_names.size(); }
  std::vector<std::size_t> class_counts() const;

  /// Shape and label audit; throws Error(Input) on the first violation.
  void validate() const;
};

std::vector<std::string> default_class_names();

/// Synthetic dual-task generator.
///
/// For each class c one set of shared rank-one components is drawn
/// (spatial pattern a_c over channels times waveform s_c over samples);
/// each task then draws its own task-specific components. A trial is the
/// sum of its class's shared and task components plus white noise.
/// Spatial patterns have unit norm and waveforms unit RMS, so noise_std
/// alone sets the difficulty.
struct SynthConfig {
  std::size_t channels = 16;
  std::size_t samples = 128;
  std::size_t classes = 3;
  std::size_t trials_per_class = 50;
  std::size_t shared_patterns = 2;
  std::size_t task_patterns = 1;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::pair<TrialDataset, TrialDataset> generate_synthetic(const SynthConfig& cfg);

/// Reads a dataset directory laid out as
///   meta.json    {"task","channels","samples","classes","n_trials","sampling_rate_hz"?}
///   trials.bin   n_trials x channels x samples float32, little-endian
///   labels.json  [class index per trial]
TrialDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const TrialDataset& data, const std::filesystem::path& dir);

/// Per-channel standardization over the time axis. Channels with zero
/// variance are only centered.
LabeledTrial zscore(const LabeledTrial& trial);
TrialDataset zscore(const TrialDataset& data);

struct DatasetSplit {
  TrialDataset train;
  TrialDataset validation;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

/// Stratified split. Each class keeps round(fraction * n_c) trials for
/// training, clamped so both parts get at least one.
DatasetSplit split(const TrialDataset& data, double train_fraction,
                   std::uint64_t seed);

}  // namespace smt
