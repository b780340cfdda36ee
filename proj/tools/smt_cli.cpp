// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0
//
// Command-line front end. Everything goes through the C API in smt/smt.h.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smt/smt.h"

namespace {

constexpr const char* kPrecedence =
    "Settings are resolved in this order, later entries winning:\n"
    "  1. built-in defaults\n"
    "  2. the SMT_SEED environment variable (seed list and synthetic data seed,\n"
    "     only where the config file does not set them)\n"
    "  3. the JSON file given with --config\n"
    "  4. command-line flags (--out, --seed, --sparsity, --method, --jobs)\n"
    "\n"
    "Exit codes: 0 success, 1 usage/configuration error, 2 data/format/I/O error,\n"
    "3 numeric divergence.";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

int exit_for(smt_status s) {
  switch (s) {
    case SMT_OK: return kOk;
    case SMT_ERR_CONFIG: return kUsage;
    case SMT_ERR_NUMERIC: return kDivergence;
    default: return kData;
  }
}

struct Failure {
  int code;
};

void check(smt_status s, const char* what) {
  if (s == SMT_OK) return;
  std::fprintf(stderr, "smt: %s: %s: %s\n", what, smt_status_name(s), smt_last_error());
  throw Failure{exit_for(s)};
}

void usage_error(const std::string& message) {
  std::fprintf(stderr, "smt: %s\n", message.c_str());
  throw Failure{kUsage};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { smt_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ExperimentDeleter {
  void operator()(smt_experiment* e) const { smt_experiment_free(e); }
};
using Experiment = std::unique_ptr<smt_experiment, ExperimentDeleter>;

struct Options {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<double> sparsities;
  std::vector<std::string> methods;
  std::size_t jobs = 0;
  std::string masks;       // train
  std::string report_dir;  // report
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "smt: cannot read config %s\n", path.c_str());
    throw Failure{kData};
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("SMT_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long n = std::strtoull(v, &end, 10);
  if (errno || *end || v[0] == '-') usage_error(std::string("SMT_SEED is not a seed: ") + v);
  return static_cast<std::uint64_t>(n);
}

// Builds the experiment from defaults, SMT_SEED, the config file and flags.
Experiment make_experiment(const Options& o) {
  std::string text = o.config.empty() ? "" : read_text(o.config);
  nlohmann::json j = nlohmann::json::object();
  if (!text.empty()) {
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      usage_error(o.config + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) usage_error(o.config + " must hold a JSON object");
  }
  if (const auto seed = env_seed()) {
    if (!j.contains("seeds")) j["seeds"] = {*seed};
    const bool files = j.contains("data") && j["data"].is_object() && j["data"].contains("mi");
    if (!files && !(j.contains("data") && j["data"].contains("synthetic") &&
                    j["data"]["synthetic"].contains("seed")))
      j["data"]["synthetic"]["seed"] = *seed;
  }
  smt_experiment* raw = nullptr;
  check(smt_experiment_create(j.dump().c_str(), &raw), "config");
  Experiment exp(raw);
  if (!o.out.empty()) check(smt_experiment_set_out(exp.get(), o.out.c_str()), "--out");
  if (!o.seeds.empty())
    check(smt_experiment_set_seeds(exp.get(), o.seeds.data(), o.seeds.size()), "--seed");
  if (!o.sparsities.empty())
    check(smt_experiment_set_sparsities(exp.get(), o.sparsities.data(), o.sparsities.size()),
          "--sparsity");
  if (!o.methods.empty()) {
    std::vector<const char*> names;
    for (const auto& m : o.methods) names.push_back(m.c_str());
    check(smt_experiment_set_methods(exp.get(), names.data(), names.size()), "--method");
  }
  if (o.jobs) check(smt_experiment_set_jobs(exp.get(), o.jobs), "--jobs");
  return exp;
}

// The (method, sparsity, seed) cells selected by the effective config.
struct Cell {
  std::string method;
  double sparsity;
  std::uint64_t seed;
};

std::vector<Cell> cells(const smt_experiment* exp) {
  OwnedString js;
  check(smt_experiment_to_json(exp, &js.p), "config");
  const auto j = nlohmann::json::parse(js.str());
  std::vector<Cell> out;
  for (const auto& m : j.at("methods")) {
    const std::string method = m.get<std::string>();
    for (const auto& s : j.at("seeds")) {
      if (method == "dense") {
        out.push_back({method, 0.0, s.get<std::uint64_t>()});
        continue;
      }
      for (const auto& sp : j.at("sparsity"))
        out.push_back({method, sp.get<double>(), s.get<std::uint64_t>()});
    }
  }
  return out;
}

std::string out_dir(const smt_experiment* exp) {
  OwnedString d;
  check(smt_experiment_out(exp, &d.p), "config");
  return d.str();
}

std::string cell_name(const Cell& c) {
  OwnedString n;
  check(smt_run_name(c.method.c_str(), c.sparsity, c.seed, &n.p), "cell");
  return n.str();
}

int cmd_generate(const Options& o) {
  Options opt = o;
  auto exp = make_experiment(opt);
  if (!o.seeds.empty()) check(smt_experiment_set_data_seed(exp.get(), o.seeds.front()), "--seed");
  OwnedString paths;
  check(smt_generate(exp.get(), &paths.p), "generate");
  std::printf("%s\n", paths.str().c_str());
  return kOk;
}

int cmd_masks(const Options& o) {
  auto exp = make_experiment(o);
  const std::filesystem::path root = std::filesystem::path(out_dir(exp.get())) / "masks";
  for (const auto& c : cells(exp.get())) {
    const auto dir = root / cell_name(c);
    smt_mask_info info{};
    check(smt_masks_generate(exp.get(), c.method.c_str(), c.sparsity, c.seed,
                             dir.string().c_str(), &info),
          "masks");
    std::printf("%s shared=%zu/%zu MI=%zu/%zu ME=%zu/%zu\n", dir.string().c_str(),
                info.retained[0], info.total[0], info.retained[1], info.total[1],
                info.retained[2], info.total[2]);
  }
  return kOk;
}

int cmd_train(const Options& o) {
  auto exp = make_experiment(o);
  const auto selected = cells(exp.get());
  if (!o.masks.empty() && selected.size() != 1)
    usage_error("--masks needs exactly one method/sparsity/seed cell");
  const std::filesystem::path root = std::filesystem::path(out_dir(exp.get())) / "runs";
  int code = kOk;
  for (const auto& c : selected) {
    const auto dir = root / cell_name(c);
    smt_run_info info{};
    check(smt_train(exp.get(), c.method.c_str(), c.sparsity, c.seed,
                    o.masks.empty() ? nullptr : o.masks.c_str(), dir.string().c_str(), &info),
          "train");
    if (info.failed) {
      std::fprintf(stderr, "smt: %s diverged: %s\n", cell_name(c).c_str(), smt_last_error());
      code = kDivergence;
      continue;
    }
    std::printf("%s epochs=%zu train_loss=%.6f MI acc=%.4f f1=%.4f ME acc=%.4f f1=%.4f\n",
                dir.string().c_str(), info.epochs, info.final_train_loss, info.val_accuracy[0],
                info.val_f1[0], info.val_accuracy[1], info.val_f1[1]);
  }
  return code;
}

int cmd_sweep(const Options& o) {
  auto exp = make_experiment(o);
  smt_sweep_info info{};
  check(smt_sweep(exp.get(), &info), "sweep");
  const std::string dir = out_dir(exp.get());
  std::printf("%zu runs, %zu report rows, %zu failed; results in %s\n", info.runs,
              info.report_rows, info.failed_runs, dir.c_str());
  if (info.failed_runs) {
    std::fprintf(stderr, "smt: %zu run(s) diverged and were recorded as failed rows\n",
                 info.failed_runs);
    return kDivergence;
  }
  return kOk;
}

int cmd_report(const Options& o) {
  std::string dir = o.report_dir;
  if (dir.empty()) dir = make_experiment(o) ? out_dir(make_experiment(o).get()) : "";
  OwnedString md;
  check(smt_report_render(dir.c_str(), &md.p), "report");
  std::fputs(md.str().c_str(), stdout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse multitask learning: pruning at initialization for dual-task trial "
               "classification."};
  app.footer(kPrecedence);
  app.require_subcommand(1);
  app.set_version_flag("--version", smt_version());

  Options o;
  auto common = [&](CLI::App* sub, bool cells_flags) {
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seeds, "Seed (repeatable)")->take_all()->allow_extra_args(false);
    if (cells_flags) {
      sub->add_option("--sparsity", o.sparsities, "Sparsity in (0, 1) (repeatable)")
          ->allow_extra_args(false);
      sub->add_option("--method", o.methods, "dense, lth, snip or ours (repeatable)")
          ->allow_extra_args(false)
          ->check(CLI::IsMember({"dense", "lth", "snip", "ours"}));
      sub->add_option("--jobs", o.jobs, "Parallel worker threads")->check(CLI::PositiveNumber);
    }
    sub->footer(kPrecedence);
  };

  auto* gen = app.add_subcommand("generate", "Write synthetic MI and ME datasets to <out>/MI, <out>/ME");
  common(gen, false);
  auto* masks = app.add_subcommand("masks", "Generate pruning masks into <out>/masks/<cell>/");
  common(masks, true);
  auto* train = app.add_subcommand("train", "Train selected cells into <out>/runs/<cell>/");
  common(train, true);
  train->add_option("--masks", o.masks, "Use this masks.bin instead of generating masks")
      ->check(CLI::ExistingFile);
  auto* sweep = app.add_subcommand("sweep", "Run the full method x sparsity x seed grid");
  common(sweep, true);
  auto* report = app.add_subcommand("report", "Render <dir>/report.csv as a markdown table");
  report->add_option("dir", o.report_dir, "Sweep output directory (default: --out or config)");
  report->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  report->add_option("--out", o.out, "Sweep output directory");
  report->footer(kPrecedence);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*masks) return cmd_masks(o);
    if (*train) return cmd_train(o);
    if (*sweep) return cmd_sweep(o);
    if (*report) return cmd_report(o);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "smt: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
