// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "smt/data.hpp"
#include "smt/model.hpp"

namespace smt {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossWeights weights;
  std::uint64_t seed = 0;
  std::size_t validate_every = 1;  // epochs; the last epoch is always validated

  void validate() const;
};

struct TaskSplits {
  TrialDataset train;
  TrialDataset validation;
};

struct TrainingData {
  TaskSplits mi;
  TaskSplits me;

  const TaskSplits& operator[](Task t) const { return t == Task::MI ? mi : me; }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss[2] = {0.0, 0.0};      // indexed by Task
  double val_accuracy[2] = {0.0, 0.0};
  double val_f1[2] = {0.0, 0.0};
  double seconds = 0.0;  // wall time; not persisted, so saved runs stay reproducible
};

struct RunRecord {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  ParameterPartition final_params;
  MaskSet masks;
  // Provenance of the masks, echoed into the masks sidecar.
  std::string method = "dense";
  double sparsity = 0.0;
  std::uint64_t mask_seed = 0;
};

/// Optimizer state visible to step hooks.
struct StepView {
  std::size_t epoch;  // 1-based
  std::size_t step;   // global, 1-based
  const ParameterPartition& params;
  const ParamTensors& first_moment;
  const ParamTensors& second_moment;
};

using StepHook = std::function<void(const StepView&)>;

/// Zeroes masked-out weights.
ParameterPartition apply_masks(const ParameterPartition& p, const MaskSet& m);

/// Static-mask multitask training with Adam.
///
/// Each step draws one batch per task from independent per-task epoch
/// shuffles (the shorter task cycles), takes the gradient of the weighted
/// two-task loss, and multiplies it by the mask before the moment updates.
/// Masked-out weights and both moments therefore stay exactly zero.
/// Throws DivergenceError when a step loss is not finite.
RunRecord train(ParameterPartition& params, const MaskSet& masks, const TrainingData& data,
                const TrainConfig& cfg, const StepHook& hook = {});

struct TaskScore {
  double loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

TaskScore score_task(const ParameterPartition& p, const MaskSet& m, const TrialDataset& data,
                     Task task);

// params.bin: "SMTPAR1", then per group: id byte, u64 LE count, count f64 LE.
void save_params(const ParameterPartition& p, const std::filesystem::path& path);
/// Loads values into a partition built for the same architecture.
ParameterPartition load_params(const ParameterPartition& layout,
                               const std::filesystem::path& path);

/// Run directory: record.json, params.bin, masks.bin, masks.json.
void save_run(const RunRecord& run, const std::filesystem::path& dir);
RunRecord load_run(const std::filesystem::path& dir);

inline constexpr int kRunFormatVersion = 1;

}  // namespace smt
