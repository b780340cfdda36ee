// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smt/data.hpp"
#include "smt/model.hpp"
#include "smt/training.hpp"

namespace smt {

struct SparsityConfig {
  double sparsity = 0.4;  // fraction removed, in (0, 1)
  std::size_t saliency_batch = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Connection sensitivity |g_j * theta_j| over phi^task + phi^s, shared
/// block first. Ranking always uses `raw`; normalized() is for reporting.
struct SaliencyScores {
  Task task = Task::MI;
  std::size_t shared_count = 0;
  std::vector<double> raw;

  std::size_t size() const noexcept { return raw.size(); }
  std::vector<double> normalized() const;
};

/// kappa = max(1, round((1 - sparsity) * group_size)).
std::size_t retained_count(std::size_t group_size, double sparsity);

/// The seeded saliency batch: min(cfg.saliency_batch, |train|) trials drawn
/// without replacement, in dataset order.
std::vector<LabeledTrial> saliency_batch(const TrialDataset& train, const SparsityConfig& cfg);

SaliencyScores saliency_scores(const ParameterPartition& p, Task task, TrialSpan batch,
                               const SparsityConfig& cfg);

/// Indices of the `count` largest scores; ties go to the lower index.
std::vector<std::size_t> top_indices(std::span<const double> scores, std::size_t count);
Mask top_count_mask(std::span<const double> scores, std::size_t count);
Mask topk_mask(std::span<const double> scores, double sparsity);

/// Element-wise OR; a weight is dropped only when every task rejected it.
Mask arbiter_or(const Mask& a, const Mask& b);

struct OursMasks {
  MaskSet masks;
  Mask candidate_mi;  // shared-block restriction of each task's selection
  Mask candidate_me;
  std::size_t kappa_mi = 0;
  std::size_t kappa_me = 0;
};

/// Per-task joint top-k over phi^k + phi^s, private part kept as the task
/// mask, shared parts merged with arbiter_or.
OursMasks generate_masks_ours_detailed(const ParameterPartition& p, const TrialDataset& train_mi,
                                       const TrialDataset& train_me, const SparsityConfig& cfg);
MaskSet generate_masks_ours(const ParameterPartition& p, const TrialDataset& train_mi,
                            const TrialDataset& train_me, const SparsityConfig& cfg);

Mask magnitude_mask(std::span<const double> theta, double sparsity);

struct LthConfig {
  std::size_t rounds = 5;
  double budget_fraction = 0.2;  // of TrainConfig::epochs, per round

  void validate() const;
};

struct LthResult {
  MaskSet masks;
  std::vector<MaskSet> history;  // mask after each round
};

/// Surviving count for a group of `group_size` after `round` of `rounds`:
/// max(1, round(group_size * (1 - sparsity)^(round / rounds))).
std::size_t lth_target(std::size_t group_size, double sparsity, std::size_t round,
                       std::size_t rounds);

/// Iterative magnitude pruning with rewinding to `init`. Each round trains
/// the current ticket for the round budget, then prunes every group
/// separately among its survivors. Divergence surfaces as Error(Numeric)
/// naming the round.
LthResult lth_masks_detailed(const ParameterPartition& init, const TrainingData& data,
                             const SparsityConfig& cfg, const LthConfig& lth,
                             const TrainConfig& train_cfg);
MaskSet lth_masks(const ParameterPartition& init, const TrainingData& data,
                  const SparsityConfig& cfg, const LthConfig& lth, const TrainConfig& train_cfg);

/// One saliency pass on the weighted two-task loss and a single global top-k
/// over every maskable weight (shared, MI, ME order).
MaskSet snip_global_masks(const ParameterPartition& p, const TrialDataset& train_mi,
                          const TrialDataset& train_me, const SparsityConfig& cfg,
                          const LossWeights& weights = {});

enum class PruneMethod { Dense, Lth, Snip, Ours };
const char* method_name(PruneMethod m) noexcept;
PruneMethod parse_method(const std::string& name);

// masks.bin: "SMTMASK1", then per group: id byte, u64 LE count, bits packed
// LSB-first into ceil(count / 8) bytes.
void save_masks(const MaskSet& m, const std::filesystem::path& path);
MaskSet load_masks(const std::filesystem::path& path);

struct MaskMeta {
  std::string method;
  double sparsity = 0.0;
  std::uint64_t seed = 0;
};

// masks.json: {"method","sigma","seed","density":{"shared","MI","ME"}}
void save_mask_sidecar(const MaskSet& m, const MaskMeta& meta, const std::filesystem::path& path);

}  // namespace smt
