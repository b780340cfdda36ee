// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "smt/error.hpp"
#include "smt/random.hpp"

namespace smt {

namespace fs = std::filesystem;
using nlohmann::json;

const char* task_name(Task task) noexcept { return task == Task::MI ? "MI" : "ME"; }

Task parse_task(const std::string& name) {
  if (name == "MI") return Task::MI;
  if (name == "ME") return Task::ME;
  throw Error(ErrorCode::Format, "unknown task tag '" + name + "' (expected MI or ME)");
}

std::vector<std::string> default_class_names() {
  return {"forearm_extension", "hand_grasp", "wrist_supination"};
}

std::size_t TrialDataset::channels() const {
  return trials.empty() ? 0 : trials.front().x.extent(0);
}

std::size_t TrialDataset::samples() const {
  return trials.empty() ? 0 : trials.front().x.extent(1);
}

std::vector<std::size_t> TrialDataset::class_counts() const {
  std::vector<std::size_t> counts(classes(), 0);
  for (const auto& t : trials)
    if (t.y < counts.size()) ++counts[t.y];
  return counts;
}

void TrialDataset::validate() const {
  if (trials.empty()) throw Error(ErrorCode::Input, "dataset has no trials");
  if (class_names.empty()) throw Error(ErrorCode::Input, "dataset has no classes");
  const Shape expect = trials.front().x.shape();
  if (expect.size() != 2)
    throw Error(ErrorCode::Input, "trials must be channels x samples, got " +
                                      shape_string(expect));
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (t.x.shape() != expect)
      throw Error(ErrorCode::Input, "trial " + std::to_string(i) + " has shape " +
                                        shape_string(t.x.shape()) + ", expected " +
                                        shape_string(expect));
    if (t.y >= classes())
      throw Error(ErrorCode::Input, "trial " + std::to_string(i) + " label " +
                                        std::to_string(t.y) + " out of range");
    if (!t.x.all_finite())
      throw Error(ErrorCode::Input, "trial " + std::to_string(i) + " has non-finite values");
  }
}

void SynthConfig::validate() const {
  if (channels == 0 || samples == 0 || classes == 0 || trials_per_class == 0 ||
      shared_patterns == 0 || task_patterns == 0)
    throw Error(ErrorCode::Config, "synthetic config counts must all be >= 1");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std))
    throw Error(ErrorCode::Config, "synthetic noise_std must be > 0");
}

namespace {

struct Component {
  std::vector<double> spatial;
  std::vector<double> temporal;
};

Component draw_component(const SynthConfig& cfg, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> freq(2.0, 20.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Component c;
  c.spatial.resize(cfg.channels);
  double norm = 0.0;
  for (auto& v : c.spatial) {
    v = normal(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : c.spatial) v /= norm;

  const double f = freq(rng);
  const double ph = phase(rng);
  c.temporal.resize(cfg.samples);
  double energy = 0.0;
  for (std::size_t t = 0; t < cfg.samples; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(cfg.samples);
    c.temporal[t] = std::sin(2.0 * std::numbers::pi * f * u + ph);
    energy += c.temporal[t] * c.temporal[t];
  }
  const double rms = std::sqrt(energy / static_cast<double>(cfg.samples));
  for (auto& v : c.temporal) v /= rms;
  return c;
}

void add_component(const Component& c, Tensor& x) {
  const std::size_t T = c.temporal.size();
  for (std::size_t e = 0; e < c.spatial.size(); ++e)
    for (std::size_t t = 0; t < T; ++t) x[e * T + t] += c.spatial[e] * c.temporal[t];
}

}  // namespace

std::pair<TrialDataset, TrialDataset> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng pattern_rng(derive_seed(cfg.seed, {stream::kData, 0}));
  std::vector<std::vector<Component>> shared(cfg.classes);
  std::vector<std::vector<Component>> task_specific[2];
  for (auto& per_class : shared)
    for (std::size_t j = 0; j < cfg.shared_patterns; ++j)
      per_class.push_back(draw_component(cfg, pattern_rng));
  for (auto& per_task : task_specific) {
    per_task.resize(cfg.classes);
    for (auto& per_class : per_task)
      for (std::size_t j = 0; j < cfg.task_patterns; ++j)
        per_class.push_back(draw_component(cfg, pattern_rng));
  }

  auto make = [&](Task task) {
    const auto k = static_cast<std::size_t>(task);
    Rng noise_rng(derive_seed(cfg.seed, {stream::kData, 1 + k}));
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    TrialDataset ds;
    ds.task = task;
    ds.class_names = cfg.classes == 3 ? default_class_names()
                                      : std::vector<std::string>{};
    for (std::size_t c = 0; ds.class_names.size() < cfg.classes; ++c)
      ds.class_names.push_back("class_" + std::to_string(c));
    // Interleave classes so file order does not group labels.
    for (std::size_t i = 0; i < cfg.trials_per_class; ++i) {
      for (std::size_t c = 0; c < cfg.classes; ++c) {
        Tensor x({cfg.channels, cfg.samples});
        for (const auto& comp : shared[c]) add_component(comp, x);
        for (const auto& comp : task_specific[k][c]) add_component(comp, x);
        for (auto& v : x.data()) v += noise(noise_rng);
        ds.trials.push_back({std::move(x), c});
      }
    }
    return ds;
  };
  return {make(Task::MI), make(Task::ME)};
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Format, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

template <typename T>
T json_field(const json& j, const char* key, const fs::path& path) {
  if (!j.contains(key))
    throw Error(ErrorCode::Format, path.string() + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Format, path.string() + ": field '" + key + "' has wrong type");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace

TrialDataset load_dataset(const fs::path& dir) {
  const auto meta_path = dir / "meta.json";
  const json meta = read_json(meta_path);
  if (!meta.is_object()) throw Error(ErrorCode::Format, meta_path.string() + ": not an object");

  TrialDataset ds;
  ds.task = parse_task(json_field<std::string>(meta, "task", meta_path));
  const auto E = json_field<std::size_t>(meta, "channels", meta_path);
  const auto T = json_field<std::size_t>(meta, "samples", meta_path);
  const auto N = json_field<std::size_t>(meta, "n_trials", meta_path);
  ds.class_names = json_field<std::vector<std::string>>(meta, "classes", meta_path);
  if (meta.contains("sampling_rate_hz") && !meta["sampling_rate_hz"].is_null())
    ds.sampling_rate_hz = json_field<double>(meta, "sampling_rate_hz", meta_path);
  if (E == 0 || T == 0 || N == 0 || ds.class_names.empty())
    throw Error(ErrorCode::Format, meta_path.string() + ": extents and class list must be non-empty");

  const auto labels_path = dir / "labels.json";
  const json labels_json = read_json(labels_path);
  if (!labels_json.is_array())
    throw Error(ErrorCode::Format, labels_path.string() + ": expected an array");
  if (labels_json.size() != N)
    throw Error(ErrorCode::Format, labels_path.string() + ": expected " + std::to_string(N) +
                                       " labels, found " + std::to_string(labels_json.size()));

  const auto bin_path = dir / "trials.bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::Format, "cannot open " + bin_path.string());
  const std::uintmax_t expected = static_cast<std::uintmax_t>(N) * E * T * 4;
  std::error_code ec;
  const std::uintmax_t actual = fs::file_size(bin_path, ec);
  if (ec || actual != expected)
    throw Error(ErrorCode::Format, bin_path.string() + ": expected " + std::to_string(expected) +
                                       " bytes, found " + std::to_string(ec ? 0 : actual));
  std::vector<unsigned char> raw(expected);
  bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::uintmax_t>(bin.gcount()) != expected)
    throw Error(ErrorCode::Format, bin_path.string() + ": short read");

  ds.trials.reserve(N);
  const std::size_t per_trial = E * T;
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<double> values(per_trial);
    for (std::size_t v = 0; v < per_trial; ++v) {
      const unsigned char* p = raw.data() + (i * per_trial + v) * 4;
      const std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                                 std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
      values[v] = static_cast<double>(std::bit_cast<float>(bits));
    }
    const auto& lj = labels_json[i];
    if (!lj.is_number_integer() || lj.get<long long>() < 0)
      throw Error(ErrorCode::Format, labels_path.string() + ": label " + std::to_string(i) +
                                         " is not a non-negative integer");
    ds.trials.push_back({Tensor({E, T}, std::move(values)), lj.get<std::size_t>()});
  }
  try {
    ds.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Format, dir.string() + ": " + e.what());
  }
  return ds;
}

void save_dataset(const TrialDataset& data, const fs::path& dir) {
  data.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  json meta = {{"task", task_name(data.task)},
               {"channels", data.channels()},
               {"samples", data.samples()},
               {"classes", data.class_names},
               {"n_trials", data.size()}};
  if (data.sampling_rate_hz) meta["sampling_rate_hz"] = *data.sampling_rate_hz;
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  json labels = json::array();
  for (const auto& t : data.trials) labels.push_back(t.y);
  write_text(dir / "labels.json", labels.dump() + "\n");

  std::string raw;
  raw.reserve(data.size() * data.channels() * data.samples() * 4);
  for (const auto& t : data.trials) {
    for (double v : t.x.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) raw.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  write_text(dir / "trials.bin", raw);
}

LabeledTrial zscore(const LabeledTrial& trial) {
  LabeledTrial out = trial;
  const std::size_t E = trial.x.extent(0);
  const std::size_t T = trial.x.extent(1);
  auto d = out.x.data();
  for (std::size_t e = 0; e < E; ++e) {
    double* row = d.data() + e * T;
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += row[t];
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (std::size_t t = 0; t < T; ++t) var += (row[t] - mean) * (row[t] - mean);
    var /= static_cast<double>(T);
    const double sd = std::sqrt(var);
    for (std::size_t t = 0; t < T; ++t) row[t] = sd > 0.0 ? (row[t] - mean) / sd : row[t] - mean;
  }
  return out;
}

TrialDataset zscore(const TrialDataset& data) {
  TrialDataset out = data;
  for (auto& t : out.trials) t = zscore(t);
  return out;
}

DatasetSplit split(const TrialDataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::Split, "train fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(data.classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.trials[i].y >= by_class.size())
      throw Error(ErrorCode::Split, "trial label out of range");
    by_class[data.trials[i].y].push_back(i);
  }
  Rng rng(derive_seed(seed, {stream::kSplit}));
  DatasetSplit out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2)
      throw Error(ErrorCode::Split, "class " + std::to_string(c) + " has " +
                                        std::to_string(idx.size()) +
                                        " trials; a split needs at least 2");
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<long>(idx.size());
    const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
    out.train_indices.insert(out.train_indices.end(), idx.begin(), idx.begin() + n_train);
    out.validation_indices.insert(out.validation_indices.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.validation_indices.begin(), out.validation_indices.end());
  for (auto* part : {&out.train, &out.validation}) {
    part->task = data.task;
    part->class_names = data.class_names;
    part->sampling_rate_hz = data.sampling_rate_hz;
  }
  for (auto i : out.train_indices) out.train.trials.push_back(data.trials[i]);
  for (auto i : out.validation_indices) out.validation.trials.push_back(data.trials[i]);
  return out;
}

}  // namespace smt
