// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/smt.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "smt/error.hpp"
#include "smt/experiment.hpp"

struct smt_experiment {
  smt::ExperimentConfig cfg;
};

struct smt_dataset {
  smt::TrialDataset data;
};

namespace {

thread_local std::string g_last_error;

smt_status status_for(smt::ErrorCode code) {
  using smt::ErrorCode;
  switch (code) {
    case ErrorCode::Config: return SMT_ERR_CONFIG;
    case ErrorCode::Format:
    case ErrorCode::Split:
    case ErrorCode::Label: return SMT_ERR_FORMAT;
    case ErrorCode::Numeric:
    case ErrorCode::Divergence: return SMT_ERR_NUMERIC;
    case ErrorCode::Dimension: return SMT_ERR_DIMENSION;
    case ErrorCode::Input: return SMT_ERR_INPUT;
    case ErrorCode::Io: return SMT_ERR_IO;
    case ErrorCode::State: return SMT_ERR_STATE;
  }
  return SMT_ERR_INTERNAL;
}

smt_status fail(smt_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

// Runs `body` with every exception translated into a status code.
template <typename F>
smt_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return SMT_OK;
  } catch (const smt::Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SMT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SMT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SMT_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw smt::Error(smt::ErrorCode::Config, what);
}

smt::PruneMethod method_arg(const char* name) {
  require(name != nullptr, "method name is NULL");
  try {
    return smt::parse_method(name);
  } catch (const smt::Error& e) {
    throw smt::Error(smt::ErrorCode::Config, e.what());
  }
}

smt::RunSpec spec_arg(const char* method, double sparsity, std::uint64_t seed) {
  smt::RunSpec spec{method_arg(method), sparsity, seed};
  if (spec.method == smt::PruneMethod::Dense) {
    spec.sparsity = 0.0;
  } else if (!(sparsity > 0.0 && sparsity < 1.0)) {
    throw smt::Error(smt::ErrorCode::Config, "sparsity must lie in (0, 1)");
  }
  return spec;
}

}  // namespace

extern "C" {

const char* smt_version(void) { return "1.0.0"; }

const char* smt_status_name(smt_status status) {
  switch (status) {
    case SMT_OK: return "ok";
    case SMT_ERR_CONFIG: return "configuration error";
    case SMT_ERR_FORMAT: return "format error";
    case SMT_ERR_NUMERIC: return "numeric error";
    case SMT_ERR_DIMENSION: return "dimension error";
    case SMT_ERR_INPUT: return "input error";
    case SMT_ERR_IO: return "I/O error";
    case SMT_ERR_STATE: return "state error";
    case SMT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* smt_last_error(void) { return g_last_error.c_str(); }

void smt_string_free(char* s) { delete[] s; }

smt_status smt_experiment_create(const char* json, smt_experiment** out) {
  return guarded([&] {
    require(out != nullptr, "output handle pointer is NULL");
    *out = nullptr;
    auto exp = std::make_unique<smt_experiment>();
    exp->cfg = smt::parse_experiment_config(json ? json : "");
    *out = exp.release();
  });
}

void smt_experiment_free(smt_experiment* exp) { delete exp; }

smt_status smt_experiment_set_out(smt_experiment* exp, const char* dir) {
  return guarded([&] {
    require(exp && dir && *dir, "output directory is required");
    exp->cfg.out = dir;
  });
}

smt_status smt_experiment_set_seeds(smt_experiment* exp, const uint64_t* seeds, size_t n) {
  return guarded([&] {
    require(exp && seeds && n > 0, "at least one seed is required");
    exp->cfg.seeds.assign(seeds, seeds + n);
  });
}

smt_status smt_experiment_set_sparsities(smt_experiment* exp, const double* sparsities,
                                         size_t n) {
  return guarded([&] {
    require(exp && sparsities && n > 0, "at least one sparsity is required");
    auto cfg = exp->cfg;
    cfg.sparsities.assign(sparsities, sparsities + n);
    cfg.validate();
    exp->cfg = std::move(cfg);
  });
}

smt_status smt_experiment_set_methods(smt_experiment* exp, const char* const* names,
                                      size_t n) {
  return guarded([&] {
    require(exp && names && n > 0, "at least one method is required");
    std::vector<smt::PruneMethod> methods;
    for (size_t i = 0; i < n; ++i) methods.push_back(method_arg(names[i]));
    exp->cfg.methods = std::move(methods);
  });
}

smt_status smt_experiment_set_jobs(smt_experiment* exp, size_t jobs) {
  return guarded([&] {
    require(exp && jobs > 0, "jobs must be >= 1");
    exp->cfg.jobs = jobs;
  });
}

smt_status smt_experiment_set_data_seed(smt_experiment* exp, uint64_t seed) {
  return guarded([&] {
    require(exp != nullptr, "experiment handle is NULL");
    exp->cfg.synthetic.seed = seed;
  });
}

smt_status smt_experiment_set_datasets(smt_experiment* exp, const char* mi_dir,
                                       const char* me_dir) {
  return guarded([&] {
    require(exp && mi_dir && me_dir, "both dataset directories are required");
    exp->cfg.mi_path = mi_dir;
    exp->cfg.me_path = me_dir;
  });
}

smt_status smt_experiment_to_json(const smt_experiment* exp, char** json) {
  return guarded([&] {
    require(exp && json, "experiment handle and output pointer are required");
    *json = copy_string(smt::experiment_config_json(exp->cfg));
  });
}

smt_status smt_experiment_out(const smt_experiment* exp, char** dir) {
  return guarded([&] {
    require(exp && dir, "experiment handle and output pointer are required");
    *dir = copy_string(exp->cfg.out.string());
  });
}

smt_status smt_dataset_load(const char* dir, smt_dataset** out) {
  return guarded([&] {
    require(dir && out, "dataset directory and output pointer are required");
    *out = nullptr;
    auto d = std::make_unique<smt_dataset>();
    d->data = smt::load_dataset(dir);
    *out = d.release();
  });
}

void smt_dataset_free(smt_dataset* data) { delete data; }

smt_status smt_dataset_get_info(const smt_dataset* data, smt_dataset_info* info) {
  return guarded([&] {
    require(data && info, "dataset handle and info pointer are required");
    info->task = static_cast<int>(data->data.task);
    info->trials = data->data.size();
    info->channels = data->data.channels();
    info->samples = data->data.samples();
    info->classes = data->data.classes();
  });
}

smt_status smt_generate(const smt_experiment* exp, char** paths) {
  return guarded([&] {
    require(exp != nullptr, "experiment handle is NULL");
    const auto dirs = smt::run_generate(exp->cfg);
    if (paths) *paths = copy_string(dirs[0].string() + "\n" + dirs[1].string());
  });
}

smt_status smt_masks_generate(const smt_experiment* exp, const char* method, double sparsity,
                              uint64_t seed, const char* dir, smt_mask_info* info) {
  return guarded([&] {
    require(exp && dir, "experiment handle and output directory are required");
    const auto spec = spec_arg(method, sparsity, seed);
    const auto prepared = smt::prepare_data(exp->cfg, seed);
    const auto init = smt::build_model(prepared.arch, seed);
    const auto masks = smt::generate_masks(exp->cfg, prepared, init, spec);
    const std::filesystem::path out(dir);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw smt::Error(smt::ErrorCode::Io, "cannot create " + out.string() + ": " + ec.message());
    smt::save_masks(masks, out / "masks.bin");
    smt::save_mask_sidecar(masks, {smt::method_name(spec.method), spec.sparsity, seed},
                           out / "masks.json");
    if (info) {
      for (auto g : smt::kGroups) {
        info->retained[smt::index_of(g)] = masks.retained(g);
        info->total[smt::index_of(g)] = masks[g].size();
      }
    }
  });
}

smt_status smt_train(const smt_experiment* exp, const char* method, double sparsity,
                     uint64_t seed, const char* masks_path, const char* dir,
                     smt_run_info* info) {
  return guarded([&] {
    require(exp && dir, "experiment handle and output directory are required");
    const auto spec = spec_arg(method, sparsity, seed);
    const auto prepared = smt::prepare_data(exp->cfg, seed);
    std::optional<smt::MaskSet> masks;
    if (masks_path) masks = smt::load_masks(masks_path);
    const auto result = smt::execute_run(exp->cfg, prepared, spec, masks ? &*masks : nullptr);
    if (info) {
      *info = smt_run_info{};
      info->failed = result.failed ? 1 : 0;
    }
    if (result.failed) {
      g_last_error = result.error;
      return;
    }
    smt::save_run(result.record, dir);
    if (info) {
      const auto& last = result.record.epochs.back();
      info->epochs = result.record.epochs.size();
      info->final_train_loss = last.train_loss;
      for (int k = 0; k < 2; ++k) {
        info->val_loss[k] = result.final_score[k].loss;
        info->val_accuracy[k] = result.final_score[k].accuracy;
        info->val_f1[k] = result.final_score[k].f1;
      }
    }
  });
}

smt_status smt_sweep(const smt_experiment* exp, smt_sweep_info* info) {
  return guarded([&] {
    require(exp != nullptr, "experiment handle is NULL");
    const auto outcome = smt::run_sweep(exp->cfg);
    if (info) {
      info->runs = outcome.runs.size();
      info->failed_runs = outcome.failed_runs;
      info->report_rows = outcome.records.size();
    }
  });
}

smt_status smt_run_name(const char* method, double sparsity, uint64_t seed, char** name) {
  return guarded([&] {
    require(name != nullptr, "output pointer is NULL");
    std::string file = smt::curve_file_name(spec_arg(method, sparsity, seed));
    file.resize(file.size() - 4);  // drop ".csv"
    *name = copy_string(file);
  });
}

smt_status smt_report_render(const char* dir, char** markdown) {
  return guarded([&] {
    require(dir && markdown, "run directory and output pointer are required");
    *markdown = copy_string(smt::render_report(dir));
  });
}

}  // extern "C"
