// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "smt/error.hpp"

namespace smt {

Confusion::Confusion(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw Error(ErrorCode::Input, "confusion matrix needs at least one class");
}

Confusion Confusion::from_predictions(std::span<const std::size_t> truth,
                                      std::span<const std::size_t> predicted,
                                      std::size_t classes) {
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::Dimension, "truth and prediction counts differ");
  Confusion c(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i], predicted[i]);
  return c;
}

void Confusion::add(std::size_t truth, std::size_t predicted, std::size_t count) {
  if (truth >= classes_ || predicted >= classes_)
    throw Error(ErrorCode::Label, "class index out of range for confusion matrix");
  counts_[truth * classes_ + predicted] += count;
  total_ += count;
}

std::size_t Confusion::at(std::size_t truth, std::size_t predicted) const {
  return counts_.at(truth * classes_ + predicted);
}

double accuracy(const Confusion& c) {
  if (c.total() == 0) throw Error(ErrorCode::Input, "accuracy of an empty confusion matrix");
  std::size_t trace = 0;
  for (std::size_t k = 0; k < c.classes(); ++k) trace += c.at(k, k);
  return static_cast<double>(trace) / static_cast<double>(c.total());
}

double macro_f1(const Confusion& c) {
  if (c.total() == 0) throw Error(ErrorCode::Input, "F1 of an empty confusion matrix");
  const std::size_t n = c.classes();
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < n; ++j) {
      predicted += c.at(j, k);
      actual += c.at(k, j);
    }
    const double tp = static_cast<double>(c.at(k, k));
    const double precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    const double recall = actual ? tp / static_cast<double>(actual) : 0.0;
    if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
  }
  return sum / static_cast<double>(n);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

namespace {

int method_rank(const std::string& m) {
  if (m == "dense") return 0;
  if (m == "lth") return 1;
  if (m == "snip") return 2;
  if (m == "ours") return 3;
  return 4;
}

std::string pretty_method(const std::string& m) {
  if (m == "dense") return "Dense";
  if (m == "lth") return "LTH";
  if (m == "snip") return "SNIP";
  if (m == "ours") return "Ours";
  return m;
}

// Sparsity keys are compared at 0.1 percentage-point resolution.
long sparsity_key(double s) { return std::lround(s * 1000.0); }

std::string fmt(const char* f, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double parse_number(const std::string& field, std::size_t line) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Format,
                "report.csv line " + std::to_string(line) + ": bad number '" + field + "'");
  }
}

}  // namespace

std::vector<AggregateCell> aggregate(std::span<const SweepRecord> records) {
  using Key = std::tuple<int, std::string, long, int>;
  struct Acc {
    double sparsity;
    std::vector<double> acc, f1;
    std::size_t failed = 0;
  };
  std::map<Key, Acc> cells;
  for (const auto& r : records) {
    Key k{method_rank(r.method), r.method, sparsity_key(r.sparsity), static_cast<int>(r.task)};
    auto& a = cells.try_emplace(k, Acc{r.sparsity, {}, {}, 0}).first->second;
    if (r.failed) {
      ++a.failed;
      continue;
    }
    a.acc.push_back(r.accuracy);
    a.f1.push_back(r.f1);
  }
  std::vector<AggregateCell> out;
  for (const auto& [k, a] : cells) {
    AggregateCell c;
    c.method = std::get<1>(k);
    c.sparsity = a.sparsity;
    c.task = static_cast<Task>(std::get<3>(k));
    c.accuracy = mean_std(a.acc);
    c.f1 = mean_std(a.f1);
    c.failed = a.failed;
    out.push_back(std::move(c));
  }
  return out;
}

std::string format_sparsity_pct(double sparsity) {
  const long tenths = std::lround(sparsity * 1000.0);
  if (tenths % 10 == 0) return std::to_string(tenths / 10);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", static_cast<double>(tenths) / 10.0);
  return buf;
}

std::string write_report_csv(std::span<const SweepRecord> records) {
  std::ostringstream os;
  os << "method,sparsity_pct,task,seed,accuracy,f1\n";
  for (const auto& r : records) {
    os << r.method << ',' << format_sparsity_pct(r.sparsity) << ',' << task_name(r.task) << ','
       << r.seed << ',';
    if (r.failed) {
      os << "nan,nan\n";
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", 100.0 * r.accuracy, r.f1);
      os << buf << '\n';
    }
  }
  return os.str();
}

std::vector<SweepRecord> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::Format, "report.csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "method,sparsity_pct,task,seed,accuracy,f1")
    throw Error(ErrorCode::Format, "report.csv has an unexpected header: '" + line + "'");
  std::vector<SweepRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6)
      throw Error(ErrorCode::Format, "report.csv line " + std::to_string(lineno) + ": expected 6 fields");
    SweepRecord r;
    r.method = f[0];
    if (r.method.empty())
      throw Error(ErrorCode::Format, "report.csv line " + std::to_string(lineno) + ": empty method");
    r.sparsity = parse_number(f[1], lineno) / 100.0;
    r.task = parse_task(f[2]);
    const double seed = parse_number(f[3], lineno);
    if (!(seed >= 0.0) || seed != std::floor(seed))
      throw Error(ErrorCode::Format, "report.csv line " + std::to_string(lineno) + ": bad seed");
    r.seed = static_cast<std::uint64_t>(seed);
    const double acc = parse_number(f[4], lineno);
    const double f1 = parse_number(f[5], lineno);
    if (std::isnan(acc) || std::isnan(f1)) {
      r.failed = true;
      r.accuracy = r.f1 = std::numeric_limits<double>::quiet_NaN();
    } else {
      r.accuracy = acc / 100.0;
      r.f1 = f1;
      if (r.accuracy < 0.0 || r.accuracy > 1.0 || r.f1 < 0.0 || r.f1 > 1.0)
        throw Error(ErrorCode::Format,
                    "report.csv line " + std::to_string(lineno) + ": metric out of range");
    }
    if (!std::isfinite(r.sparsity) || r.sparsity < 0.0 || r.sparsity >= 1.0)
      throw Error(ErrorCode::Format, "report.csv line " + std::to_string(lineno) + ": bad sparsity");
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_report_markdown(std::span<const AggregateCell> cells) {
  struct Row {
    std::string method;
    double sparsity;
    const AggregateCell* task[2] = {nullptr, nullptr};
  };
  std::vector<Row> rows;
  for (const auto& c : cells) {
    if (rows.empty() || rows.back().method != c.method ||
        sparsity_key(rows.back().sparsity) != sparsity_key(c.sparsity))
      rows.push_back({c.method, c.sparsity});
    rows.back().task[static_cast<int>(c.task)] = &c;
  }
  std::ostringstream os;
  os << "| Method | Sparsity (%) | MI Acc. (%) | MI F1 | ME Acc. (%) | ME F1 |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << pretty_method(r.method) << " | " << format_sparsity_pct(r.sparsity);
    for (const auto* c : r.task) {
      if (!c || c->accuracy.n == 0) {
        os << " | - | -";
        continue;
      }
      os << " | " << fmt("%.1f ± %.1f", 100.0 * c->accuracy.mean, 100.0 * c->accuracy.std)
         << " | " << fmt("%.2f ± %.2f", c->f1.mean, c->f1.std);
    }
    os << " |\n";
  }
  return os.str();
}

}  // namespace smt
