// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/model.hpp"

#include <cmath>
#include <memory>

#include "smt/error.hpp"
#include "smt/graph.hpp"
#include "smt/random.hpp"

namespace smt {

const char* group_name(Group g) noexcept {
  switch (g) {
    case Group::Shared: return "shared";
    case Group::MI: return "MI";
    case Group::ME: return "ME";
  }
  return "?";
}

void ArchConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::Config, "architecture: " + msg); };
  if (channels == 0 || samples == 0 || temporal_filters == 0 || temporal_kernel == 0 ||
      spatial_filters == 0 || pool_width == 0 || embedding == 0 || head_hidden == 0 ||
      classes == 0)
    bad("all extents must be >= 1");
  if (temporal_kernel > samples)
    bad("temporal kernel " + std::to_string(temporal_kernel) + " exceeds samples " +
        std::to_string(samples));
  if (conv_length() % pool_width != 0)
    bad("pool width " + std::to_string(pool_width) + " does not divide conv length " +
        std::to_string(conv_length()));
}

std::size_t ParameterGroup::maskable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries)
    if (e.maskable) n += e.value.size();
  return n;
}

std::size_t ParameterGroup::total_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.value.size();
  return n;
}

std::vector<double> ParameterGroup::maskable_values() const {
  std::vector<double> out;
  out.reserve(maskable_count());
  for (const auto& e : entries)
    if (e.maskable) out.insert(out.end(), e.value.data().begin(), e.value.data().end());
  return out;
}

void ParameterGroup::set_maskable_values(std::span<const double> values) {
  if (values.size() != maskable_count())
    throw Error(ErrorCode::Dimension, std::string("group ") + group_name(id) + " has " +
                                          std::to_string(maskable_count()) +
                                          " maskable values, got " +
                                          std::to_string(values.size()));
  std::size_t k = 0;
  for (auto& e : entries) {
    if (!e.maskable) continue;
    for (auto& v : e.value.data()) v = values[k++];
  }
}

ParameterPartition::ParameterPartition(ArchConfig arch, std::array<ParameterGroup, 3> groups)
    : arch_(arch), groups_(std::move(groups)) {
  for (auto g : kGroups) groups_[index_of(g)].id = g;
}

std::size_t ParameterPartition::total_maskable() const {
  return maskable(Group::Shared) + maskable(Group::MI) + maskable(Group::ME);
}

std::size_t ParameterPartition::task_maskable(Task t) const {
  return maskable(Group::Shared) + maskable(private_group(t));
}

std::size_t ParameterPartition::total_parameters() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.total_count();
  return n;
}

std::vector<double> ParamTensors::maskable_values(const ParameterPartition& layout,
                                                  Group g) const {
  std::vector<double> out;
  const auto& entries = layout.group(g).entries;
  const auto& tensors = (*this)[g];
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].maskable)
      out.insert(out.end(), tensors[i].data().begin(), tensors[i].data().end());
  return out;
}

ParamTensors zeros_like(const ParameterPartition& p) {
  ParamTensors t;
  for (auto g : kGroups)
    for (const auto& e : p.group(g).entries) t[g].push_back(Tensor(e.value.shape()));
  return t;
}

Mask& MaskSet::operator[](Group g) {
  return g == Group::Shared ? shared : (g == Group::MI ? mi : me);
}

const Mask& MaskSet::operator[](Group g) const {
  return g == Group::Shared ? shared : (g == Group::MI ? mi : me);
}

MaskSet MaskSet::filled(const ParameterPartition& p, std::uint8_t bit) {
  MaskSet m;
  for (auto g : kGroups) m[g].assign(p.maskable(g), bit);
  return m;
}

void MaskSet::check_aligned(const ParameterPartition& p) const {
  for (auto g : kGroups) {
    const auto& mask = (*this)[g];
    if (mask.size() != p.maskable(g))
      throw Error(ErrorCode::Dimension, std::string("mask for group ") + group_name(g) +
                                            " has length " + std::to_string(mask.size()) +
                                            ", partition has " +
                                            std::to_string(p.maskable(g)) +
                                            " maskable weights");
    for (auto b : mask)
      if (b > 1)
        throw Error(ErrorCode::Dimension, std::string("mask for group ") + group_name(g) +
                                              " has a non-binary entry");
  }
}

std::size_t MaskSet::retained(Group g) const {
  std::size_t n = 0;
  for (auto b : (*this)[g]) n += b;
  return n;
}

double MaskSet::density(Group g) const {
  const auto& mask = (*this)[g];
  return mask.empty() ? 0.0 : static_cast<double>(retained(g)) / static_cast<double>(mask.size());
}

void LossWeights::validate() const {
  if (!(mi >= 0.0) || !(me >= 0.0) || !(mi + me > 0.0) || !std::isfinite(mi + me))
    throw Error(ErrorCode::Config, "loss weights must be non-negative with a positive sum");
}

namespace {

ParamEntry he_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor w(std::move(shape));
  for (auto& v : w.data()) v = dist(rng);
  return {std::move(name), std::move(w), true};
}

ParamEntry zero_bias(std::string name, std::size_t n) {
  return {std::move(name), Tensor({n}), false};
}

// Entry order inside groups; the forward pass depends on it.
enum SharedEntry { kTemporalW, kTemporalB, kSpatialW, kSpatialB, kEmbedW, kEmbedB };
enum HeadEntry { kHiddenW, kHiddenB, kOutW, kOutB };

/// Masked view of one (partition, masks) snapshot: effective weights are
/// materialized once and shared across all per-trial graphs.
class MaskedModel {
 public:
  MaskedModel(const ParameterPartition& p, const MaskSet& m) : p_(p), m_(m) {
    p.arch().validate();
    m.check_aligned(p);
    for (auto g : kGroups) {
      const auto& entries = p.group(g).entries;
      const auto& mask = m[g];
      std::size_t offset = 0;
      for (const auto& e : entries) {
        if (!e.maskable) {
          effective_[index_of(g)].push_back(std::make_shared<const Tensor>(e.value));
          grad_masks_[index_of(g)].resize(effective_[index_of(g)].size());
          offsets_[index_of(g)].push_back(0);
          continue;
        }
        Tensor w = e.value;
        auto d = w.data();
        for (std::size_t j = 0; j < d.size(); ++j)
          if (!mask[offset + j]) d[j] = 0.0;
        effective_[index_of(g)].push_back(std::make_shared<const Tensor>(std::move(w)));
        grad_masks_[index_of(g)].resize(effective_[index_of(g)].size());
        grad_masks_[index_of(g)].back() = std::make_shared<const std::vector<std::uint8_t>>(
            mask.begin() + static_cast<std::ptrdiff_t>(offset),
            mask.begin() + static_cast<std::ptrdiff_t>(offset + d.size()));
        offsets_[index_of(g)].push_back(offset);
        offset += d.size();
      }
    }
  }

  struct Pass {
    Graph graph;
    std::array<Graph::NodeId, 6> trunk{};
    std::array<Graph::NodeId, 4> head{};
    Graph::NodeId input = 0;
    Graph::NodeId logits = 0;
    Graph::NodeId loss = 0;
  };

  Tensor logits(const Tensor& x, Task task) {
    Pass& pass = bind(x, 0, task);
    pass.graph.forward();
    return pass.graph.value(pass.logits);
  }

  /// Returns sum of per-trial losses; when `grad` is set, adds
  /// scale * d(loss_i)/d(theta) for every trial.
  double accumulate(TrialSpan batch, Task task, double scale, ParamTensors* grad) {
    double total = 0.0;
    for (const auto& trial : batch) {
      Pass& pass = bind(trial.x, trial.y, task);
      Graph& g = pass.graph;
      g.forward();
      total += g.value(pass.loss)[0];
      if (!grad || scale == 0.0) continue;
      g.backward(pass.loss, scale);
      for (std::size_t i = 0; i < pass.trunk.size(); ++i)
        add_grad(Group::Shared, i, g.gradient(pass.trunk[i]), *grad);
      for (std::size_t i = 0; i < pass.head.size(); ++i)
        add_grad(private_group(task), i, g.gradient(pass.head[i]), *grad);
    }
    return total;
  }

 private:
  // One graph per task, built on first use and re-bound for every trial.
  Pass& bind(const Tensor& x, std::size_t label, Task task) {
    const ArchConfig& a = p_.arch();
    if (x.shape() != Shape{a.channels, a.samples})
      throw Error(ErrorCode::Dimension, "trial shape " + shape_string(x.shape()) +
                                            " does not match model input " +
                                            std::to_string(a.channels) + "x" +
                                            std::to_string(a.samples));
    auto& slot = passes_[static_cast<std::size_t>(task)];
    if (!slot) slot = build(task);
    Pass& pass = *slot;
    pass.graph.set_input(pass.input, x.reshaped({a.channels, 1, a.samples}));
    pass.graph.set_label(pass.loss, label);
    return pass;
  }

  std::unique_ptr<Pass> build(Task task) const {
    const ArchConfig& a = p_.arch();
    auto pass = std::make_unique<Pass>();
    Graph& g = pass->graph;
    const auto& trunk = effective_[index_of(Group::Shared)];
    const auto& head = effective_[index_of(private_group(task))];
    const auto gi = index_of(private_group(task));
    for (std::size_t i = 0; i < trunk.size(); ++i)
      pass->trunk[i] = g.parameter(trunk[i], grad_masks_[index_of(Group::Shared)][i]);
    for (std::size_t i = 0; i < head.size(); ++i)
      pass->head[i] = g.parameter(head[i], grad_masks_[gi][i]);

    pass->input = g.input(Tensor({a.channels, 1, a.samples}));
    auto h = g.conv_temporal(pass->input, pass->trunk[kTemporalW], pass->trunk[kTemporalB]);
    h = g.elu(h);
    h = g.reshape(h, {a.temporal_filters * a.channels, a.conv_length()});
    h = g.conv_temporal(h, pass->trunk[kSpatialW], pass->trunk[kSpatialB]);
    h = g.elu(h);
    h = g.avg_pool(h, a.pool_width);
    h = g.reshape(h, {a.spatial_filters * a.pooled_length()});
    h = g.dense(h, pass->trunk[kEmbedW], pass->trunk[kEmbedB]);
    h = g.dense(h, pass->head[kHiddenW], pass->head[kHiddenB]);
    h = g.elu(h);
    pass->logits = g.dense(h, pass->head[kOutW], pass->head[kOutB]);
    pass->loss = g.softmax_cross_entropy(pass->logits, 0);
    return pass;
  }

  void add_grad(Group grp, std::size_t entry, const Tensor& g, ParamTensors& out) const {
    const auto& e = p_.group(grp).entries[entry];
    auto dst = out[grp][entry].data();
    const auto src = g.data();
    if (!e.maskable) {
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      return;
    }
    const auto* bits = m_[grp].data() + offsets_[index_of(grp)][entry];
    for (std::size_t j = 0; j < dst.size(); ++j)
      if (bits[j]) dst[j] += src[j];
  }

  const ParameterPartition& p_;
  const MaskSet& m_;
  std::array<std::vector<std::shared_ptr<const Tensor>>, 3> effective_;
  std::array<std::vector<std::size_t>, 3> offsets_;
  std::array<std::vector<std::shared_ptr<const std::vector<std::uint8_t>>>, 3> grad_masks_;
  std::array<std::unique_ptr<Pass>, 2> passes_;
};

void require_batch(TrialSpan batch, Task task) {
  if (batch.empty())
    throw Error(ErrorCode::Input, std::string("empty ") + task_name(task) + " batch");
}

}  // namespace

ParameterPartition build_model(const ArchConfig& a, std::uint64_t seed) {
  a.validate();
  Rng rng(derive_seed(seed, {stream::kInit}));
  std::array<ParameterGroup, 3> groups;

  auto& trunk = groups[index_of(Group::Shared)].entries;
  trunk.push_back(he_uniform("temporal.weight", {a.temporal_filters, 1, a.temporal_kernel},
                             a.temporal_kernel, rng));
  trunk.push_back(zero_bias("temporal.bias", a.temporal_filters));
  const std::size_t spatial_in = a.temporal_filters * a.channels;
  trunk.push_back(
      he_uniform("spatial.weight", {a.spatial_filters, spatial_in, 1}, spatial_in, rng));
  trunk.push_back(zero_bias("spatial.bias", a.spatial_filters));
  const std::size_t flat = a.spatial_filters * a.pooled_length();
  trunk.push_back(he_uniform("embed.weight", {a.embedding, flat}, flat, rng));
  trunk.push_back(zero_bias("embed.bias", a.embedding));

  for (auto g : {Group::MI, Group::ME}) {
    auto& head = groups[index_of(g)].entries;
    head.push_back(he_uniform("hidden.weight", {a.head_hidden, a.embedding}, a.embedding, rng));
    head.push_back(zero_bias("hidden.bias", a.head_hidden));
    head.push_back(he_uniform("out.weight", {a.classes, a.head_hidden}, a.head_hidden, rng));
    head.push_back(zero_bias("out.bias", a.classes));
  }
  return ParameterPartition(a, std::move(groups));
}

Tensor forward_task(const ParameterPartition& p, const MaskSet& m, const Tensor& x, Task task) {
  MaskedModel model(p, m);
  return model.logits(x, task);
}

double mean_task_loss(const ParameterPartition& p, const MaskSet& m, TrialSpan batch, Task task) {
  require_batch(batch, task);
  MaskedModel model(p, m);
  return model.accumulate(batch, task, 0.0, nullptr) /
         static_cast<double>(batch.size());
}

double multitask_loss(const ParameterPartition& p, const MaskSet& m, TrialSpan batch_mi,
                      TrialSpan batch_me, const LossWeights& w) {
  w.validate();
  require_batch(batch_mi, Task::MI);
  require_batch(batch_me, Task::ME);
  MaskedModel model(p, m);
  const double l_mi =
      model.accumulate(batch_mi, Task::MI, 0.0, nullptr) / static_cast<double>(batch_mi.size());
  const double l_me =
      model.accumulate(batch_me, Task::ME, 0.0, nullptr) / static_cast<double>(batch_me.size());
  return w.mi * l_mi + w.me * l_me;
}

LossGradient multitask_loss_gradient(const ParameterPartition& p, const MaskSet& m,
                                     TrialSpan batch_mi, TrialSpan batch_me,
                                     const LossWeights& w) {
  w.validate();
  require_batch(batch_mi, Task::MI);
  require_batch(batch_me, Task::ME);
  MaskedModel model(p, m);
  LossGradient out;
  out.grad = zeros_like(p);
  const double n_mi = static_cast<double>(batch_mi.size());
  const double n_me = static_cast<double>(batch_me.size());
  out.loss_mi = model.accumulate(batch_mi, Task::MI, w.mi / n_mi, &out.grad) / n_mi;
  out.loss_me = model.accumulate(batch_me, Task::ME, w.me / n_me, &out.grad) / n_me;
  out.loss = w.mi * out.loss_mi + w.me * out.loss_me;
  return out;
}

LossGradient task_loss_gradient(const ParameterPartition& p, const MaskSet& m, TrialSpan batch,
                                Task task) {
  require_batch(batch, task);
  MaskedModel model(p, m);
  LossGradient out;
  out.grad = zeros_like(p);
  const double n = static_cast<double>(batch.size());
  const double loss = model.accumulate(batch, task, 1.0 / n, &out.grad) / n;
  (task == Task::MI ? out.loss_mi : out.loss_me) = loss;
  out.loss = loss;
  return out;
}

TaskEvaluation evaluate_task(const ParameterPartition& p, const MaskSet& m, TrialSpan trials,
                             Task task) {
  require_batch(trials, task);
  MaskedModel model(p, m);
  TaskEvaluation ev;
  double total = 0.0;
  for (const auto& t : trials) {
    const Tensor z = model.logits(t.x, task);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c)
      if (z[c] > z[best]) best = c;
    ev.predictions.push_back(best);
    total += ops::softmax_cross_entropy(z, t.y);
  }
  ev.mean_loss = total / static_cast<double>(trials.size());
  return ev;
}

}  // namespace smt
