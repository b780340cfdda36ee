// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json_io.hpp"
#include "smt/error.hpp"
#include "smt/random.hpp"

namespace smt {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (mi_path.has_value() != me_path.has_value())
    throw Error(ErrorCode::Config, "data: both 'mi' and 'me' dataset paths are required");
  if (!uses_files()) {
    synthetic.validate();
    // File datasets are checked once their shapes are known.
    ArchConfig fitted = arch;
    fitted.channels = synthetic.channels;
    fitted.samples = synthetic.samples;
    fitted.classes = synthetic.classes;
    fitted.validate();
  }
  train.validate();
  lth.validate();
  if (methods.empty()) throw Error(ErrorCode::Config, "at least one method is required");
  if (seeds.empty()) throw Error(ErrorCode::Config, "at least one seed is required");
  const bool sparse = std::any_of(methods.begin(), methods.end(),
                                  [](PruneMethod m) { return m != PruneMethod::Dense; });
  if (sparse && sparsities.empty())
    throw Error(ErrorCode::Config, "sparse methods need at least one sparsity level");
  for (double s : sparsities)
    if (!(s > 0.0 && s < 1.0))
      throw Error(ErrorCode::Config, "sparsity values must lie in (0, 1); use method 'dense' for none");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::Config, "train_fraction must lie in (0, 1)");
  if (saliency_batch < 1) throw Error(ErrorCode::Config, "saliency_batch must be >= 1");
  if (jobs < 1) throw Error(ErrorCode::Config, "jobs must be >= 1");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
  }
  const std::string where = "config";
  check_keys(j, {"data", "arch", "train", "lth", "sparsity", "methods", "seeds", "train_fraction",
                 "saliency_batch", "out", "jobs"},
             where);
  ExperimentConfig cfg;
  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, {"synthetic", "mi", "me"}, "data");
    if (d.contains("synthetic")) cfg.synthetic = synth_from_json(d["synthetic"]);
    std::string p;
    if (d.contains("mi")) {
      read_opt(d, "mi", p, "data");
      cfg.mi_path = p;
    }
    if (d.contains("me")) {
      read_opt(d, "me", p, "data");
      cfg.me_path = p;
    }
  }
  if (j.contains("arch")) cfg.arch = arch_from_json(j["arch"]);
  if (j.contains("train")) cfg.train = train_from_json(j["train"]);
  if (j.contains("lth")) {
    check_keys(j["lth"], {"rounds", "budget_fraction"}, "lth");
    read_opt(j["lth"], "rounds", cfg.lth.rounds, "lth");
    read_opt(j["lth"], "budget_fraction", cfg.lth.budget_fraction, "lth");
  }
  read_opt(j, "sparsity", cfg.sparsities, where);
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read_opt(j, "methods", names, where);
    cfg.methods.clear();
    for (const auto& n : names) cfg.methods.push_back(parse_method(n));
  }
  read_opt(j, "seeds", cfg.seeds, where);
  read_opt(j, "train_fraction", cfg.train_fraction, where);
  read_opt(j, "saliency_batch", cfg.saliency_batch, where);
  if (j.contains("out")) {
    std::string out;
    read_opt(j, "out", out, where);
    cfg.out = out;
  }
  read_opt(j, "jobs", cfg.jobs, where);
  cfg.validate();
  return cfg;
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json data = json::object();
  if (cfg.uses_files()) {
    data["mi"] = cfg.mi_path->string();
    data["me"] = cfg.me_path->string();
  } else {
    data["synthetic"] = to_json_value(cfg.synthetic);
  }
  std::vector<std::string> methods;
  for (auto m : cfg.methods) methods.emplace_back(method_name(m));
  const json j = {{"data", data},
                  {"arch", to_json_value(cfg.arch)},
                  {"train", to_json_value(cfg.train)},
                  {"lth", {{"rounds", cfg.lth.rounds}, {"budget_fraction", cfg.lth.budget_fraction}}},
                  {"sparsity", cfg.sparsities},
                  {"methods", methods},
                  {"seeds", cfg.seeds},
                  {"train_fraction", cfg.train_fraction},
                  {"saliency_batch", cfg.saliency_batch},
                  {"out", cfg.out.string()}};
  return j.dump(2) + "\n";
}

namespace {

TaskSplits split_task(const TrialDataset& raw, double fraction, std::uint64_t seed) {
  auto parts = split(zscore(raw), fraction, derive_seed(seed, {stream::kSplit,
                                                               static_cast<std::uint64_t>(raw.task)}));
  return {std::move(parts.train), std::move(parts.validation)};
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrialDataset mi, me;
  if (cfg.uses_files()) {
    mi = load_dataset(*cfg.mi_path);
    me = load_dataset(*cfg.me_path);
    if (mi.task != Task::MI || me.task != Task::ME)
      throw Error(ErrorCode::Format, "data: 'mi' must hold an MI dataset and 'me' an ME dataset");
    if (mi.channels() != me.channels() || mi.samples() != me.samples() ||
        mi.classes() != me.classes())
      throw Error(ErrorCode::Format, "data: MI and ME datasets differ in shape or class count");
  } else {
    SynthConfig sc = cfg.synthetic;
    sc.seed = derive_seed(cfg.synthetic.seed, {stream::kData, seed});
    std::tie(mi, me) = generate_synthetic(sc);
  }
  PreparedData out;
  out.arch = cfg.arch;
  out.arch.channels = mi.channels();
  out.arch.samples = mi.samples();
  out.arch.classes = mi.classes();
  out.arch.validate();
  out.data.mi = split_task(mi, cfg.train_fraction, seed);
  out.data.me = split_task(me, cfg.train_fraction, seed);
  return out;
}

std::vector<RunSpec> enumerate_runs(const ExperimentConfig& cfg) {
  std::vector<double> sparsities = cfg.sparsities;
  std::sort(sparsities.begin(), sparsities.end());
  sparsities.erase(std::unique(sparsities.begin(), sparsities.end()), sparsities.end());
  std::vector<RunSpec> runs;
  for (auto m : cfg.methods) {
    if (m == PruneMethod::Dense) {
      for (auto s : cfg.seeds) runs.push_back({m, 0.0, s});
      continue;
    }
    for (double sp : sparsities)
      for (auto s : cfg.seeds) runs.push_back({m, sp, s});
  }
  return runs;
}

MaskSet generate_masks(const ExperimentConfig& cfg, const PreparedData& prepared,
                       const ParameterPartition& init, const RunSpec& spec) {
  if (spec.method == PruneMethod::Dense) return MaskSet::ones(init);
  const SparsityConfig sc{spec.sparsity, cfg.saliency_batch,
                          derive_seed(spec.seed, {stream::kSaliency})};
  const auto& d = prepared.data;
  switch (spec.method) {
    case PruneMethod::Ours:
      return generate_masks_ours(init, d.mi.train, d.me.train, sc);
    case PruneMethod::Snip:
      return snip_global_masks(init, d.mi.train, d.me.train, sc, cfg.train.weights);
    case PruneMethod::Lth: {
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(cfg.train.seed, {stream::kLth, spec.seed});
      return lth_masks(init, d, sc, cfg.lth, tc);
    }
    case PruneMethod::Dense:
      break;
  }
  return MaskSet::ones(init);
}

RunResult execute_run(const ExperimentConfig& cfg, const PreparedData& prepared,
                      const RunSpec& spec, const MaskSet* given) {
  RunResult out;
  out.spec = spec;
  const ParameterPartition init = build_model(prepared.arch, spec.seed);
  try {
    const MaskSet masks = given ? *given : generate_masks(cfg, prepared, init, spec);
    masks.check_aligned(init);
    ParameterPartition params = apply_masks(init, masks);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, {stream::kTrain, spec.seed});
    out.record = train(params, masks, prepared.data, tc);
  } catch (const DivergenceError& e) {
    out.failed = true;
    out.error = e.what();
    return out;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Numeric) throw;
    out.failed = true;
    out.error = e.what();
    return out;
  }
  out.record.method = method_name(spec.method);
  out.record.sparsity = spec.sparsity;
  out.record.mask_seed = spec.seed;
  const auto& last = out.record.epochs.back();
  for (std::size_t k = 0; k < 2; ++k) {
    out.final_val_loss[k] = last.val_loss[k];
    out.final_score[k] = {last.val_loss[k], last.val_accuracy[k], last.val_f1[k]};
  }
  return out;
}

std::string curve_file_name(const RunSpec& spec) {
  return std::string(method_name(spec.method)) + "_s" + format_sparsity_pct(spec.sparsity) +
         "_seed" + std::to_string(spec.seed) + ".csv";
}

std::string curve_csv(const RunRecord& record) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss_MI,val_loss_ME\n";
  char buf[128];
  for (const auto& e : record.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss[0],
                  e.val_loss[1]);
    os << buf;
  }
  return os.str();
}

SweepOutcome run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto specs = enumerate_runs(cfg);

  std::map<std::uint64_t, PreparedData> prepared;
  for (auto s : cfg.seeds)
    if (!prepared.count(s)) prepared.emplace(s, prepare_data(cfg, s));

  std::error_code ec;
  fs::create_directories(cfg.out / "curves", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + (cfg.out / "curves").string() + ": " + ec.message());

  SweepOutcome outcome;
  outcome.runs.resize(specs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      try {
        auto r = execute_run(cfg, prepared.at(specs[i].seed), specs[i]);
        if (!r.failed) write_file_atomic(cfg.out / "curves" / curve_file_name(r.spec), curve_csv(r.record));
        outcome.runs[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = specs.size();
      }
    }
  };
  const std::size_t n_workers = std::min(cfg.jobs, std::max<std::size_t>(1, specs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const auto& r : outcome.runs) {
    if (r.failed) ++outcome.failed_runs;
    for (auto task : {Task::MI, Task::ME}) {
      SweepRecord rec;
      rec.method = method_name(r.spec.method);
      rec.sparsity = r.spec.sparsity;
      rec.task = task;
      rec.seed = r.spec.seed;
      rec.failed = r.failed;
      const auto k = static_cast<std::size_t>(task);
      rec.accuracy = r.failed ? std::nan("") : r.final_score[k].accuracy;
      rec.f1 = r.failed ? std::nan("") : r.final_score[k].f1;
      outcome.records.push_back(rec);
    }
  }
  write_file_atomic(cfg.out / "report.csv", write_report_csv(outcome.records));
  const auto cells = aggregate(outcome.records);
  write_file_atomic(cfg.out / "report.md", render_report_markdown(cells));
  write_file_atomic(cfg.out / "config.json", experiment_config_json(cfg));
  return outcome;
}

std::vector<fs::path> run_generate(const ExperimentConfig& cfg) {
  cfg.synthetic.validate();
  auto [mi, me] = generate_synthetic(cfg.synthetic);
  const fs::path mi_dir = cfg.out / "MI";
  const fs::path me_dir = cfg.out / "ME";
  save_dataset(mi, mi_dir);
  save_dataset(me, me_dir);
  return {mi_dir, me_dir};
}

std::string render_report(const fs::path& dir) {
  const fs::path csv = dir / "report.csv";
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(ErrorCode::Format, "cannot open " + csv.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto records = parse_report_csv(text);
  if (records.empty()) throw Error(ErrorCode::Format, csv.string() + " has no rows");
  return render_report_markdown(aggregate(records));
}

}  // namespace smt
