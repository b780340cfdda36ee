// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json_io.hpp"
#include "smt/error.hpp"
#include "smt/random.hpp"

namespace smt {

namespace fs = std::filesystem;

void SparsityConfig::validate() const {
  if (!(sparsity > 0.0 && sparsity < 1.0))
    throw Error(ErrorCode::Config, "sparsity must lie in (0, 1), got " + std::to_string(sparsity));
  if (saliency_batch < 1) throw Error(ErrorCode::Config, "saliency batch must be >= 1");
}

std::vector<double> SaliencyScores::normalized() const {
  double sum = 0.0;
  for (double v : raw) sum += v;
  std::vector<double> out(raw.size());
  if (sum > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / sum;
  } else if (!raw.empty()) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(raw.size()));
  }
  return out;
}

std::size_t retained_count(std::size_t group_size, double sparsity) {
  const long k = std::lround((1.0 - sparsity) * static_cast<double>(group_size));
  return static_cast<std::size_t>(std::max(1L, k));
}

std::vector<LabeledTrial> saliency_batch(const TrialDataset& train, const SparsityConfig& cfg) {
  if (train.size() == 0)
    throw Error(ErrorCode::Input, std::string("empty ") + task_name(train.task) + " saliency data");
  const std::size_t n = std::min(cfg.saliency_batch, train.size());
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, {stream::kSaliency, static_cast<std::uint64_t>(train.task)}));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<LabeledTrial> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(train.trials[i]);
  return out;
}

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorCode::Numeric, std::string("non-finite ") + what);
}

void append_sensitivity(const ParameterPartition& p, const ParamTensors& grad, Group g,
                        std::vector<double>& out) {
  const auto theta = p.group(g).maskable_values();
  const auto gvals = grad.maskable_values(p, g);
  for (std::size_t j = 0; j < theta.size(); ++j) out.push_back(std::abs(gvals[j] * theta[j]));
}

}  // namespace

SaliencyScores saliency_scores(const ParameterPartition& p, Task task, TrialSpan batch,
                               const SparsityConfig& cfg) {
  cfg.validate();
  if (batch.empty())
    throw Error(ErrorCode::Input, std::string("empty ") + task_name(task) + " saliency batch");
  const auto lg = task_loss_gradient(p, MaskSet::ones(p), batch, task);
  SaliencyScores s;
  s.task = task;
  s.shared_count = p.maskable(Group::Shared);
  s.raw.reserve(p.task_maskable(task));
  append_sensitivity(p, lg.grad, Group::Shared, s.raw);
  append_sensitivity(p, lg.grad, private_group(task), s.raw);
  check_finite(s.raw, "saliency gradient");
  return s;
}

std::vector<std::size_t> top_indices(std::span<const double> scores, std::size_t count) {
  if (count > scores.size())
    throw Error(ErrorCode::Input, "cannot keep " + std::to_string(count) + " of " +
                                      std::to_string(scores.size()) + " entries");
  for (double v : scores)
    if (std::isnan(v)) throw Error(ErrorCode::Numeric, "NaN score in top-k selection");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  if (count < idx.size()) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(), before);
    idx.resize(count);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

Mask top_count_mask(std::span<const double> scores, std::size_t count) {
  Mask m(scores.size(), 0);
  for (auto i : top_indices(scores, count)) m[i] = 1;
  return m;
}

Mask topk_mask(std::span<const double> scores, double sparsity) {
  if (!(sparsity > 0.0 && sparsity < 1.0))
    throw Error(ErrorCode::Config, "sparsity must lie in (0, 1)");
  if (scores.empty()) throw Error(ErrorCode::Input, "top-k over an empty group");
  return top_count_mask(scores, retained_count(scores.size(), sparsity));
}

Mask arbiter_or(const Mask& a, const Mask& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::Dimension, "arbiter inputs have lengths " + std::to_string(a.size()) +
                                          " and " + std::to_string(b.size()));
  Mask out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] | b[i]) ? 1 : 0;
  return out;
}

OursMasks generate_masks_ours_detailed(const ParameterPartition& p, const TrialDataset& train_mi,
                                       const TrialDataset& train_me, const SparsityConfig& cfg) {
  cfg.validate();
  OursMasks out;
  out.masks = MaskSet::zeros(p);
  for (auto [task, data] : {std::pair{Task::MI, &train_mi}, std::pair{Task::ME, &train_me}}) {
    const auto batch = saliency_batch(*data, cfg);
    const auto scores = saliency_scores(p, task, batch, cfg);
    const std::size_t kappa = retained_count(scores.size(), cfg.sparsity);
    const Mask joint = top_count_mask(scores.raw, kappa);
    const auto split = joint.begin() + static_cast<std::ptrdiff_t>(scores.shared_count);
    out.masks[private_group(task)] = Mask(split, joint.end());
    (task == Task::MI ? out.candidate_mi : out.candidate_me) = Mask(joint.begin(), split);
    (task == Task::MI ? out.kappa_mi : out.kappa_me) = kappa;
  }
  out.masks.shared = arbiter_or(out.candidate_mi, out.candidate_me);
  return out;
}

MaskSet generate_masks_ours(const ParameterPartition& p, const TrialDataset& train_mi,
                            const TrialDataset& train_me, const SparsityConfig& cfg) {
  return generate_masks_ours_detailed(p, train_mi, train_me, cfg).masks;
}

Mask magnitude_mask(std::span<const double> theta, double sparsity) {
  std::vector<double> mag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) mag[i] = std::abs(theta[i]);
  return topk_mask(mag, sparsity);
}

void LthConfig::validate() const {
  if (rounds < 1) throw Error(ErrorCode::Config, "LTH rounds must be >= 1");
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0))
    throw Error(ErrorCode::Config, "LTH budget fraction must lie in (0, 1]");
}

std::size_t lth_target(std::size_t group_size, double sparsity, std::size_t round,
                       std::size_t rounds) {
  const double keep =
      std::pow(1.0 - sparsity, static_cast<double>(round) / static_cast<double>(rounds));
  const long k = std::lround(keep * static_cast<double>(group_size));
  return static_cast<std::size_t>(std::clamp(k, 1L, static_cast<long>(group_size)));
}

LthResult lth_masks_detailed(const ParameterPartition& init, const TrainingData& data,
                             const SparsityConfig& cfg, const LthConfig& lth,
                             const TrainConfig& train_cfg) {
  cfg.validate();
  lth.validate();
  TrainConfig round_cfg = train_cfg;
  round_cfg.epochs = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(lth.budget_fraction * static_cast<double>(train_cfg.epochs))));
  round_cfg.validate_every = round_cfg.epochs;

  LthResult out;
  MaskSet current = MaskSet::ones(init);
  for (std::size_t round = 1; round <= lth.rounds; ++round) {
    ParameterPartition ticket = apply_masks(init, current);  // rewind
    round_cfg.seed = derive_seed(train_cfg.seed, {stream::kLth, round});
    try {
      train(ticket, current, data, round_cfg);
    } catch (const DivergenceError& e) {
      throw Error(ErrorCode::Numeric, "LTH round " + std::to_string(round) + ": " + e.what());
    }
    MaskSet next = current;
    for (auto g : kGroups) {
      const auto theta = ticket.group(g).maskable_values();
      const auto& alive = current[g];
      std::vector<double> scores;
      std::vector<std::size_t> where;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        if (!alive[j]) continue;
        scores.push_back(std::abs(theta[j]));
        where.push_back(j);
      }
      const std::size_t target =
          std::min(lth_target(theta.size(), cfg.sparsity, round, lth.rounds), scores.size());
      Mask& m = next[g];
      std::fill(m.begin(), m.end(), 0);
      for (auto k : top_indices(scores, target)) m[where[k]] = 1;
    }
    current = next;
    out.history.push_back(current);
  }
  out.masks = current;
  return out;
}

MaskSet lth_masks(const ParameterPartition& init, const TrainingData& data,
                  const SparsityConfig& cfg, const LthConfig& lth, const TrainConfig& train_cfg) {
  return lth_masks_detailed(init, data, cfg, lth, train_cfg).masks;
}

MaskSet snip_global_masks(const ParameterPartition& p, const TrialDataset& train_mi,
                          const TrialDataset& train_me, const SparsityConfig& cfg,
                          const LossWeights& weights) {
  cfg.validate();
  const auto batch_mi = saliency_batch(train_mi, cfg);
  const auto batch_me = saliency_batch(train_me, cfg);
  const auto lg = multitask_loss_gradient(p, MaskSet::ones(p), batch_mi, batch_me, weights);
  std::vector<double> scores;
  scores.reserve(p.total_maskable());
  for (auto g : kGroups) append_sensitivity(p, lg.grad, g, scores);
  check_finite(scores, "saliency gradient");
  const Mask global = top_count_mask(scores, retained_count(scores.size(), cfg.sparsity));
  MaskSet out;
  std::size_t offset = 0;
  for (auto g : kGroups) {
    const std::size_t n = p.maskable(g);
    out[g] = Mask(global.begin() + static_cast<std::ptrdiff_t>(offset),
                  global.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
  }
  return out;
}

const char* method_name(PruneMethod m) noexcept {
  switch (m) {
    case PruneMethod::Dense: return "dense";
    case PruneMethod::Lth: return "lth";
    case PruneMethod::Snip: return "snip";
    case PruneMethod::Ours: return "ours";
  }
  return "?";
}

PruneMethod parse_method(const std::string& name) {
  if (name == "dense") return PruneMethod::Dense;
  if (name == "lth") return PruneMethod::Lth;
  if (name == "snip") return PruneMethod::Snip;
  if (name == "ours") return PruneMethod::Ours;
  throw Error(ErrorCode::Config, "unknown method '" + name + "' (expected dense, lth, snip, ours)");
}

namespace {

constexpr char kMaskMagic[] = "SMTMASK1";
constexpr std::size_t kMaskMagicLen = 8;

}  // namespace

void save_masks(const MaskSet& m, const fs::path& path) {
  std::string out(kMaskMagic, kMaskMagicLen);
  for (auto g : kGroups) {
    const auto& mask = m[g];
    out.push_back(static_cast<char>(index_of(g)));
    const std::uint64_t n = mask.size();
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((n >> (8 * b)) & 0xFF));
    std::string packed((mask.size() + 7) / 8, '\0');
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
    out += packed;
  }
  write_file_atomic(path, out);
}

MaskSet load_masks(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Format, "cannot open " + path.string());
  const std::string raw{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (raw.size() < kMaskMagicLen || raw.compare(0, kMaskMagicLen, kMaskMagic) != 0)
    throw Error(ErrorCode::Format, path.string() + ": bad mask file magic");
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  std::size_t pos = kMaskMagicLen;
  MaskSet out;
  for (auto g : kGroups) {
    if (raw.size() < pos + 9) throw Error(ErrorCode::Format, path.string() + ": truncated mask file");
    if (bytes[pos] != index_of(g))
      throw Error(ErrorCode::Format, path.string() + ": unexpected group id " +
                                         std::to_string(bytes[pos]));
    std::uint64_t n = 0;
    for (int b = 7; b >= 0; --b) n = (n << 8) | bytes[pos + 1 + b];
    pos += 9;
    const std::size_t nbytes = static_cast<std::size_t>((n + 7) / 8);
    if (raw.size() < pos + nbytes)
      throw Error(ErrorCode::Format, path.string() + ": truncated mask file");
    Mask& m = out[g];
    m.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (bytes[pos + i / 8] >> (i % 8)) & 1;
    pos += nbytes;
  }
  if (pos != raw.size()) throw Error(ErrorCode::Format, path.string() + ": trailing bytes");
  return out;
}

void save_mask_sidecar(const MaskSet& m, const MaskMeta& meta, const fs::path& path) {
  const json j = {{"method", meta.method},
                  {"sigma", meta.sparsity},
                  {"seed", meta.seed},
                  {"density",
                   {{"shared", m.density(Group::Shared)},
                    {"MI", m.density(Group::MI)},
                    {"ME", m.density(Group::ME)}}}};
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace smt
