// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "json_io.hpp"

#include <fstream>

namespace smt {

namespace fs = std::filesystem;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::Config, where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCode::Config, where + ": unknown field '" + key + "'");
  }
}

json to_json_value(const ArchConfig& a) {
  return {{"channels", a.channels},
          {"samples", a.samples},
          {"temporal_filters", a.temporal_filters},
          {"temporal_kernel", a.temporal_kernel},
          {"spatial_filters", a.spatial_filters},
          {"pool_width", a.pool_width},
          {"embedding", a.embedding},
          {"head_hidden", a.head_hidden},
          {"classes", a.classes}};
}

ArchConfig arch_from_json(const json& j, ArchConfig a) {
  const std::string where = "arch";
  check_keys(j, {"channels", "samples", "temporal_filters", "temporal_kernel", "spatial_filters",
                 "pool_width", "embedding", "head_hidden", "classes"},
             where);
  read_opt(j, "channels", a.channels, where);
  read_opt(j, "samples", a.samples, where);
  read_opt(j, "temporal_filters", a.temporal_filters, where);
  read_opt(j, "temporal_kernel", a.temporal_kernel, where);
  read_opt(j, "spatial_filters", a.spatial_filters, where);
  read_opt(j, "pool_width", a.pool_width, where);
  read_opt(j, "embedding", a.embedding, where);
  read_opt(j, "head_hidden", a.head_hidden, where);
  read_opt(j, "classes", a.classes, where);
  return a;
}

json to_json_value(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"lambda_mi", c.weights.mi},
          {"lambda_me", c.weights.me},
          {"seed", c.seed},
          {"validate_every", c.validate_every}};
}

TrainConfig train_from_json(const json& j, TrainConfig c) {
  const std::string where = "train";
  check_keys(j, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "lambda_mi",
                 "lambda_me", "seed", "validate_every"},
             where);
  read_opt(j, "epochs", c.epochs, where);
  read_opt(j, "batch_size", c.batch_size, where);
  read_opt(j, "learning_rate", c.learning_rate, where);
  read_opt(j, "beta1", c.beta1, where);
  read_opt(j, "beta2", c.beta2, where);
  read_opt(j, "epsilon", c.epsilon, where);
  read_opt(j, "lambda_mi", c.weights.mi, where);
  read_opt(j, "lambda_me", c.weights.me, where);
  read_opt(j, "seed", c.seed, where);
  read_opt(j, "validate_every", c.validate_every, where);
  return c;
}

json to_json_value(const SynthConfig& s) {
  return {{"channels", s.channels},
          {"samples", s.samples},
          {"classes", s.classes},
          {"trials_per_class", s.trials_per_class},
          {"shared_patterns", s.shared_patterns},
          {"task_patterns", s.task_patterns},
          {"noise_std", s.noise_std},
          {"seed", s.seed}};
}

SynthConfig synth_from_json(const json& j, SynthConfig s) {
  const std::string where = "data.synthetic";
  check_keys(j, {"channels", "samples", "classes", "trials_per_class", "shared_patterns",
                 "task_patterns", "noise_std", "seed"},
             where);
  read_opt(j, "channels", s.channels, where);
  read_opt(j, "samples", s.samples, where);
  read_opt(j, "classes", s.classes, where);
  read_opt(j, "trials_per_class", s.trials_per_class, where);
  read_opt(j, "shared_patterns", s.shared_patterns, where);
  read_opt(j, "task_patterns", s.task_patterns, where);
  read_opt(j, "noise_std", s.noise_std, where);
  read_opt(j, "seed", s.seed, where);
  return s;
}

json read_json_file(const fs::path& path, ErrorCode on_error) {
  std::ifstream in(path);
  if (!in) throw Error(on_error, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(on_error, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace smt
