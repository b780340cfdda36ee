// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smt/data.hpp"

namespace smt {

/// Rows are true classes, columns predicted classes.
class Confusion {
 public:
  explicit Confusion(std::size_t classes);

  static Confusion from_predictions(std::span<const std::size_t> truth,
                                    std::span<const std::size_t> predicted,
                                    std::size_t classes);

  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1);
  std::size_t at(std::size_t truth, std::size_t predicted) const;
  std::size_t classes() const noexcept { return classes_; }
  std::size_t total() const noexcept { return total_; }

 private:
  std::size_t classes_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

double accuracy(const Confusion& c);

/// Unweighted mean of per-class F1; a class with precision + recall == 0
/// contributes 0.
double macro_f1(const Confusion& c);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 when n == 1
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

/// One evaluated (method, sparsity, task, seed) run. Accuracy and F1 are in
/// [0, 1]; a failed run has failed == true and carries NaN metrics.
struct SweepRecord {
  std::string method;
  double sparsity = 0.0;
  Task task = Task::MI;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  bool failed = false;
};

struct AggregateCell {
  std::string method;
  double sparsity = 0.0;
  Task task = Task::MI;
  MeanStd accuracy;
  MeanStd f1;
  std::size_t failed = 0;
};

/// Mean and std per (method, sparsity, task) over non-failed records, in
/// canonical method order (dense, lth, snip, ours, then others by name) and
/// ascending sparsity.
std::vector<AggregateCell> aggregate(std::span<const SweepRecord> records);

/// Whole-number percentages print without a fraction ("40"), others with one
/// decimal.
std::string format_sparsity_pct(double sparsity);

/// report.csv: method,sparsity_pct,task,seed,accuracy,f1 with accuracy in
/// percent and F1 as a fraction.
std::string write_report_csv(std::span<const SweepRecord> records);
std::vector<SweepRecord> parse_report_csv(const std::string& text);

/// Markdown grid: one row per (method, sparsity), MI and ME accuracy/F1
/// columns, cells "mean ± std".
std::string render_report_markdown(std::span<const AggregateCell> cells);

}  // namespace smt
