// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <json.hpp>

#include <filesystem>
#include <initializer_list>
#include <string>

#include "smt/data.hpp"
#include "smt/error.hpp"
#include "smt/model.hpp"
#include "smt/training.hpp"

namespace smt {

using nlohmann::json;

/// Rejects keys outside `allowed` so config typos do not pass silently.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where);

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Config, where + ": field '" + key + "' has the wrong type");
  }
}

json to_json_value(const ArchConfig& a);
ArchConfig arch_from_json(const json& j, ArchConfig base = {});
json to_json_value(const TrainConfig& c);
TrainConfig train_from_json(const json& j, TrainConfig base = {});
json to_json_value(const SynthConfig& s);
SynthConfig synth_from_json(const json& j, SynthConfig base = {});

json read_json_file(const std::filesystem::path& path, ErrorCode on_error);
/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace smt
