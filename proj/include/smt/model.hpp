// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smt/data.hpp"
#include "smt/tensor.hpp"

namespace smt {

/// Shallow dual-task CNN.
///
///   x (E x T)
///   -> temporal conv, F1 kernels of width k_t shared across channels -> ELU
///   -> spatial conv, F2 kernels spanning all F1 x E maps               -> ELU
///   -> average pool (width p) -> flatten -> dense to m       [shared trunk]
///   -> dense m->h -> ELU -> dense h->C                       [one head per task]
struct ArchConfig {
  std::size_t channels = 16;
  std::size_t samples = 128;
  std::size_t temporal_filters = 8;
  std::size_t temporal_kernel = 25;
  std::size_t spatial_filters = 16;
  std::size_t pool_width = 8;
  std::size_t embedding = 64;
  std::size_t head_hidden = 32;
  std::size_t classes = 3;

  void validate() const;
  std::size_t conv_length() const { return samples - temporal_kernel + 1; }
  std::size_t pooled_length() const { return conv_length() / pool_width; }

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

enum class Group : std::uint8_t { Shared = 0, MI = 1, ME = 2 };
inline constexpr std::array<Group, 3> kGroups{Group::Shared, Group::MI, Group::ME};

const char* group_name(Group g) noexcept;
constexpr Group private_group(Task t) noexcept {
  return t == Task::MI ? Group::MI : Group::ME;
}
constexpr std::size_t index_of(Group g) noexcept { return static_cast<std::size_t>(g); }

struct ParamEntry {
  std::string name;
  Tensor value;
  bool maskable = true;  // weights are maskable, biases are not

  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

struct ParameterGroup {
  Group id = Group::Shared;
  std::vector<ParamEntry> entries;

  std::size_t maskable_count() const;
  std::size_t total_count() const;
  /// Maskable weights concatenated in entry order; index = group-local flat index.
  std::vector<double> maskable_values() const;
  void set_maskable_values(std::span<const double> values);

  friend bool operator==(const ParameterGroup&, const ParameterGroup&) = default;
};

/// Shared trunk (phi^s) plus one private head per task (phi^MI, phi^ME).
///
/// Maskable flat indexing is group-local and follows entry order. For the
/// per-task union phi^k + phi^s the shared block comes first, and the global
/// order used by SNIP is shared, MI, ME.
class ParameterPartition {
 public:
  ParameterPartition() = default;
  ParameterPartition(ArchConfig arch, std::array<ParameterGroup, 3> groups);

  const ArchConfig& arch() const noexcept { return arch_; }
  const ParameterGroup& group(Group g) const { return groups_[index_of(g)]; }
  ParameterGroup& group(Group g) { return groups_[index_of(g)]; }

  std::size_t maskable(Group g) const { return group(g).maskable_count(); }
  std::size_t total_maskable() const;  // d
  std::size_t task_maskable(Task t) const;  // d^ks
  std::size_t total_parameters() const;

  friend bool operator==(const ParameterPartition&, const ParameterPartition&) = default;

 private:
  ArchConfig arch_;
  std::array<ParameterGroup, 3> groups_;
};

/// Same layout as a partition; used for gradients and optimizer moments.
struct ParamTensors {
  std::array<std::vector<Tensor>, 3> groups;

  std::vector<Tensor>& operator[](Group g) { return groups[index_of(g)]; }
  const std::vector<Tensor>& operator[](Group g) const { return groups[index_of(g)]; }
  /// Maskable slots concatenated in the partition's flat order for `g`.
  std::vector<double> maskable_values(const ParameterPartition& layout, Group g) const;

  friend bool operator==(const ParamTensors&, const ParamTensors&) = default;
};

ParamTensors zeros_like(const ParameterPartition& p);

using Mask = std::vector<std::uint8_t>;

struct MaskSet {
  Mask shared;
  Mask mi;
  Mask me;

  Mask& operator[](Group g);
  const Mask& operator[](Group g) const;

  static MaskSet filled(const ParameterPartition& p, std::uint8_t bit);
  static MaskSet ones(const ParameterPartition& p) { return filled(p, 1); }
  static MaskSet zeros(const ParameterPartition& p) { return filled(p, 0); }

  /// Throws Error(Dimension) if lengths differ from the partition's groups or
  /// an entry is not 0/1.
  void check_aligned(const ParameterPartition& p) const;
  std::size_t retained(Group g) const;
  double density(Group g) const;

  friend bool operator==(const MaskSet&, const MaskSet&) = default;
};

struct LossWeights {
  double mi = 1.0;
  double me = 1.0;

  void validate() const;
  double operator[](Task t) const { return t == Task::MI ? mi : me; }
};

ParameterPartition build_model(const ArchConfig& cfg, std::uint64_t seed);

/// Logits for one trial. Every maskable weight is multiplied by its mask bit;
/// the trunk uses the shared mask and `task` selects the head.
Tensor forward_task(const ParameterPartition& p, const MaskSet& m, const Tensor& x,
                    Task task);

using TrialSpan = std::span<const LabeledTrial>;

double mean_task_loss(const ParameterPartition& p, const MaskSet& m, TrialSpan batch,
                      Task task);

/// lambda_MI * mean CE(MI batch) + lambda_ME * mean CE(ME batch).
double multitask_loss(const ParameterPartition& p, const MaskSet& m, TrialSpan batch_mi,
                      TrialSpan batch_me, const LossWeights& w);

struct LossGradient {
  double loss = 0.0;
  double loss_mi = 0.0;  // unweighted mean
  double loss_me = 0.0;
  ParamTensors grad;     // d loss / d theta; zero at masked-out weights
};

LossGradient multitask_loss_gradient(const ParameterPartition& p, const MaskSet& m,
                                     TrialSpan batch_mi, TrialSpan batch_me,
                                     const LossWeights& w);

/// Gradient of one task's mean loss. Only the trunk and that task's head
/// receive nonzero entries.
LossGradient task_loss_gradient(const ParameterPartition& p, const MaskSet& m,
                                TrialSpan batch, Task task);

struct TaskEvaluation {
  double mean_loss = 0.0;
  std::vector<std::size_t> predictions;
};

TaskEvaluation evaluate_task(const ParameterPartition& p, const MaskSet& m,
                             TrialSpan trials, Task task);

}  // namespace smt
