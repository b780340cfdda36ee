// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/training.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json_io.hpp"
#include "smt/error.hpp"
#include "smt/metrics.hpp"
#include "smt/pruning.hpp"
#include "smt/random.hpp"

namespace smt {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::Config, "train: epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::Config, "train: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::Config, "train: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw Error(ErrorCode::Config, "train: moment coefficients must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::Config, "train: epsilon must be > 0");
  if (validate_every < 1) throw Error(ErrorCode::Config, "train: validate_every must be >= 1");
  weights.validate();
}

ParameterPartition apply_masks(const ParameterPartition& p, const MaskSet& m) {
  m.check_aligned(p);
  ParameterPartition out = p;
  for (auto g : kGroups) {
    const auto& mask = m[g];
    std::size_t k = 0;
    for (auto& e : out.group(g).entries) {
      if (!e.maskable) continue;
      for (auto& v : e.value.data())
        if (!mask[k++]) v = 0.0;
    }
  }
  return out;
}

namespace {

/// Epoch-wise shuffled batches over one task's training trials.
class BatchCursor {
 public:
  BatchCursor(const TrialDataset& data, std::uint64_t seed)
      : data_(data), rng_(seed), order_(data.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    pos_ = order_.size();
  }

  void start_epoch() { reshuffle(); }

  std::vector<LabeledTrial> next(std::size_t batch) {
    if (pos_ >= order_.size()) reshuffle();
    const std::size_t n = std::min(batch, order_.size() - pos_);
    std::vector<LabeledTrial> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(data_.trials[order_[pos_ + i]]);
    pos_ += n;
    return out;
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  const TrialDataset& data_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_;
};

void adam_update(ParameterPartition& p, const MaskSet& masks, const ParamTensors& grad,
                 ParamTensors& m1, ParamTensors& m2, const TrainConfig& cfg, std::size_t t) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto g : kGroups) {
    auto& entries = p.group(g).entries;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto theta = entries[i].value.data();
      const auto gr = grad[g][i].data();
      auto m = m1[g][i].data();
      auto v = m2[g][i].data();
      const std::uint8_t* bits = entries[i].maskable ? masks[g].data() + offset : nullptr;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        if (bits && !bits[j]) continue;  // masked gradient: no moment or weight change
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gr[j];
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gr[j] * gr[j];
        const double mhat = m[j] / c1;
        const double vhat = v[j] / c2;
        theta[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
      if (entries[i].maskable) offset += theta.size();
    }
  }
}

void require_split(const TaskSplits& s, Task t) {
  if (s.train.size() == 0 || s.validation.size() == 0)
    throw Error(ErrorCode::Input, std::string("empty ") + task_name(t) + " train/validation split");
}

}  // namespace

TaskScore score_task(const ParameterPartition& p, const MaskSet& m, const TrialDataset& data,
                     Task task) {
  const auto ev = evaluate_task(p, m, data.trials, task);
  std::vector<std::size_t> truth;
  truth.reserve(data.size());
  for (const auto& t : data.trials) truth.push_back(t.y);
  const auto c = Confusion::from_predictions(truth, ev.predictions, p.arch().classes);
  return {ev.mean_loss, accuracy(c), macro_f1(c)};
}

RunRecord train(ParameterPartition& params, const MaskSet& masks, const TrainingData& data,
                const TrainConfig& cfg, const StepHook& hook) {
  cfg.validate();
  masks.check_aligned(params);
  require_split(data.mi, Task::MI);
  require_split(data.me, Task::ME);
  params = apply_masks(params, masks);

  ParamTensors m1 = zeros_like(params);
  ParamTensors m2 = zeros_like(params);
  BatchCursor cursor_mi(data.mi.train, derive_seed(cfg.seed, {stream::kShuffle, 0}));
  BatchCursor cursor_me(data.me.train, derive_seed(cfg.seed, {stream::kShuffle, 1}));
  const auto batches = [&](std::size_t n) { return (n + cfg.batch_size - 1) / cfg.batch_size; };
  const std::size_t steps_per_epoch =
      std::max(batches(data.mi.train.size()), batches(data.me.train.size()));

  RunRecord rec;
  rec.config = cfg;
  std::size_t step = 0;
  EpochRecord last_val;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    cursor_mi.start_epoch();
    cursor_me.start_epoch();
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      ++step;
      const auto batch_mi = cursor_mi.next(cfg.batch_size);
      const auto batch_me = cursor_me.next(cfg.batch_size);
      auto lg = multitask_loss_gradient(params, masks, batch_mi, batch_me, cfg.weights);
      if (!std::isfinite(lg.loss))
        throw DivergenceError(epoch, step, "training diverged at epoch " + std::to_string(epoch) +
                                               ", step " + std::to_string(step));
      loss_sum += lg.loss;
      adam_update(params, masks, lg.grad, m1, m2, cfg, step);
      if (hook) hook(StepView{epoch, step, params, m1, m2});
    }

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    if (epoch == 1 || epoch == cfg.epochs || epoch % cfg.validate_every == 0) {
      for (auto task : {Task::MI, Task::ME}) {
        const auto k = static_cast<std::size_t>(task);
        const auto sc = score_task(params, masks, data[task].validation, task);
        if (!std::isfinite(sc.loss))
          throw DivergenceError(epoch, step, "validation loss diverged at epoch " +
                                                 std::to_string(epoch));
        er.val_loss[k] = sc.loss;
        er.val_accuracy[k] = sc.accuracy;
        er.val_f1[k] = sc.f1;
      }
      last_val = er;
    } else {
      for (std::size_t k = 0; k < 2; ++k) {
        er.val_loss[k] = last_val.val_loss[k];
        er.val_accuracy[k] = last_val.val_accuracy[k];
        er.val_f1[k] = last_val.val_f1[k];
      }
    }
    er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.epochs.push_back(er);
  }
  rec.final_params = params;
  rec.masks = masks;
  return rec;
}

namespace {

constexpr char kParamMagic[] = "SMTPAR1";
constexpr std::size_t kParamMagicLen = 7;

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

std::string read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Format, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_params(const ParameterPartition& p, const fs::path& path) {
  std::string out(kParamMagic, kParamMagicLen);
  for (auto g : kGroups) {
    out.push_back(static_cast<char>(index_of(g)));
    put_u64(out, p.group(g).total_count());
    for (const auto& e : p.group(g).entries)
      for (double v : e.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  write_file_atomic(path, out);
}

ParameterPartition load_params(const ParameterPartition& layout, const fs::path& path) {
  const std::string raw = read_binary(path);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < kParamMagicLen || raw.compare(0, 6, kParamMagic, 6) != 0)
    throw Error(ErrorCode::Format, path.string() + ": not a parameter snapshot");
  if (raw[6] != kParamMagic[6])
    throw Error(ErrorCode::Format, path.string() + ": snapshot version '" + raw.substr(6, 1) +
                                       "' does not match supported version 1");
  ParameterPartition out = layout;
  std::size_t pos = kParamMagicLen;
  for (auto g : kGroups) {
    if (raw.size() < pos + 9) throw Error(ErrorCode::Format, path.string() + ": truncated snapshot");
    if (bytes[pos] != index_of(g))
      throw Error(ErrorCode::Format, path.string() + ": unexpected group id");
    const std::uint64_t count = get_u64(bytes + pos + 1);
    pos += 9;
    if (count != layout.group(g).total_count())
      throw Error(ErrorCode::Format, path.string() + ": group " + group_name(g) + " has " +
                                         std::to_string(count) + " values, architecture expects " +
                                         std::to_string(layout.group(g).total_count()));
    if (raw.size() < pos + count * 8)
      throw Error(ErrorCode::Format, path.string() + ": truncated snapshot");
    for (auto& e : out.group(g).entries) {
      for (auto& v : e.value.data()) {
        v = std::bit_cast<double>(get_u64(bytes + pos));
        pos += 8;
      }
    }
  }
  if (pos != raw.size())
    throw Error(ErrorCode::Format, path.string() + ": trailing bytes after snapshot");
  return out;
}

void save_run(const RunRecord& run, const fs::path& dir) {
  json epochs = json::array();
  for (const auto& e : run.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss_MI", e.val_loss[0]},
                      {"val_loss_ME", e.val_loss[1]},
                      {"val_acc_MI", e.val_accuracy[0]},
                      {"val_acc_ME", e.val_accuracy[1]},
                      {"val_f1_MI", e.val_f1[0]},
                      {"val_f1_ME", e.val_f1[1]}});
  }
  json rec = {{"format_version", kRunFormatVersion},
              {"arch", to_json_value(run.final_params.arch())},
              {"config", to_json_value(run.config)},
              {"method", run.method},
              {"sigma", run.sparsity},
              {"mask_seed", run.mask_seed},
              {"epochs", epochs}};
  write_file_atomic(dir / "record.json", rec.dump(2) + "\n");
  save_params(run.final_params, dir / "params.bin");
  save_masks(run.masks, dir / "masks.bin");
  save_mask_sidecar(run.masks, {run.method, run.sparsity, run.mask_seed}, dir / "masks.json");
}

RunRecord load_run(const fs::path& dir) {
  const json rec = read_json_file(dir / "record.json", ErrorCode::Format);
  try {
    if (!rec.is_object() || !rec.contains("format_version"))
      throw Error(ErrorCode::Format, "record.json: missing format_version");
    const int version = rec.at("format_version").get<int>();
    if (version != kRunFormatVersion)
      throw Error(ErrorCode::Format, "record.json: format version " + std::to_string(version) +
                                         " does not match supported version " +
                                         std::to_string(kRunFormatVersion));
    RunRecord run;
    const ArchConfig arch = arch_from_json(rec.at("arch"));
    run.config = train_from_json(rec.at("config"));
    run.method = rec.at("method").get<std::string>();
    run.sparsity = rec.at("sigma").get<double>();
    run.mask_seed = rec.at("mask_seed").get<std::uint64_t>();
    for (const auto& e : rec.at("epochs")) {
      EpochRecord er;
      er.epoch = e.at("epoch").get<std::size_t>();
      er.train_loss = e.at("train_loss").get<double>();
      er.val_loss[0] = e.at("val_loss_MI").get<double>();
      er.val_loss[1] = e.at("val_loss_ME").get<double>();
      er.val_accuracy[0] = e.at("val_acc_MI").get<double>();
      er.val_accuracy[1] = e.at("val_acc_ME").get<double>();
      er.val_f1[0] = e.at("val_f1_MI").get<double>();
      er.val_f1[1] = e.at("val_f1_ME").get<double>();
      run.epochs.push_back(er);
    }
    run.final_params = load_params(build_model(arch, 0), dir / "params.bin");
    run.masks = load_masks(dir / "masks.bin");
    run.masks.check_aligned(run.final_params);
    return run;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, dir.string() + "/record.json: " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Format) throw;
    throw Error(ErrorCode::Format, dir.string() + ": " + e.what());
  }
}

}  // namespace smt
