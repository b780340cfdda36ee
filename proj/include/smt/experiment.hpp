// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smt/data.hpp"
#include "smt/metrics.hpp"
#include "smt/model.hpp"
#include "smt/pruning.hpp"
#include "smt/training.hpp"

namespace smt {

/// Everything a generate / masks / train / sweep invocation needs.
///
/// JSON layout (every field optional):
///   {
///     "data":  {"synthetic": {...}} | {"mi": "dir", "me": "dir"},
///     "arch":  {...}, "train": {...}, "lth": {"rounds", "budget_fraction"},
///     "sparsity": [0.2, 0.4, 0.8], "methods": ["dense", "lth", "snip", "ours"],
///     "seeds": [1, 2, 3, 4, 5], "train_fraction": 0.8, "saliency_batch": 128,
///     "out": "dir", "jobs": 1
///   }
struct ExperimentConfig {
  SynthConfig synthetic;
  std::optional<std::filesystem::path> mi_path;
  std::optional<std::filesystem::path> me_path;
  ArchConfig arch;
  TrainConfig train;
  LthConfig lth;
  std::vector<double> sparsities{0.2, 0.4, 0.8};
  std::vector<PruneMethod> methods{PruneMethod::Dense, PruneMethod::Lth, PruneMethod::Snip,
                                   PruneMethod::Ours};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double train_fraction = 0.8;
  std::size_t saliency_batch = 128;
  std::filesystem::path out = "smt_out";
  std::size_t jobs = 1;

  bool uses_files() const noexcept { return mi_path.has_value(); }
  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_json(const ExperimentConfig& cfg);

/// Z-scored, split data for one seed plus the architecture fitted to it.
/// Synthetic data is regenerated per seed from derive(synthetic.seed, seed);
/// file datasets are shared across seeds and only the split changes.
struct PreparedData {
  TrainingData data;
  ArchConfig arch;
};

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunSpec {
  PruneMethod method = PruneMethod::Dense;
  double sparsity = 0.0;  // 0 for dense
  std::uint64_t seed = 0;
};

/// Every (method, sparsity, seed) cell in sweep order: methods as configured,
/// sparsities ascending, seeds as configured. Dense contributes one run per seed.
std::vector<RunSpec> enumerate_runs(const ExperimentConfig& cfg);

MaskSet generate_masks(const ExperimentConfig& cfg, const PreparedData& prepared,
                       const ParameterPartition& init, const RunSpec& spec);

struct RunResult {
  RunSpec spec;
  bool failed = false;
  std::string error;
  RunRecord record;
  double final_val_loss[2] = {0.0, 0.0};
  TaskScore final_score[2];
};

/// Build, mask, train, evaluate one run. Divergence is reported through
/// `failed`; other errors propagate. When `masks` is given it replaces the
/// generated masks (it must fit the seeded model).
RunResult execute_run(const ExperimentConfig& cfg, const PreparedData& prepared,
                      const RunSpec& spec, const MaskSet* masks = nullptr);

std::string curve_file_name(const RunSpec& spec);
std::string curve_csv(const RunRecord& record);

struct SweepOutcome {
  std::vector<RunResult> runs;
  std::vector<SweepRecord> records;
  std::size_t failed_runs = 0;
};

/// Runs every cell on cfg.jobs worker threads and writes report.csv,
/// report.md, config.json and curves/ under cfg.out. Output bytes do not
/// depend on the job count.
SweepOutcome run_sweep(const ExperimentConfig& cfg);

/// Writes <out>/MI and <out>/ME from the synthetic config; returns the paths.
std::vector<std::filesystem::path> run_generate(const ExperimentConfig& cfg);

/// Renders <dir>/report.csv as the aggregated markdown grid.
std::string render_report(const std::filesystem::path& dir);

}  // namespace smt
