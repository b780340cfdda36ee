// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>
#include <json.hpp>

#include "smt/error.hpp"
#include "smt/experiment.hpp"
#include "support.hpp"

namespace smt {
namespace {

using nlohmann::json;
using testing::ScratchDir;
using testing::slurp;

// Small enough that a multi-method sweep takes a couple of seconds.
json tiny_config(const std::filesystem::path& out) {
  return {{"data",
           {{"synthetic",
             {{"channels", 4}, {"samples", 32}, {"trials_per_class", 8}, {"noise_std", 0.5},
              {"seed", 3}}}}},
          {"arch",
           {{"temporal_filters", 2}, {"temporal_kernel", 5}, {"spatial_filters", 2},
            {"pool_width", 4}, {"embedding", 6}, {"head_hidden", 4}}},
          {"train", {{"epochs", 3}, {"batch_size", 8}}},
          {"lth", {{"rounds", 2}, {"budget_fraction", 0.5}}},
          {"sparsity", {0.8, 0.4}},
          {"methods", {"dense", "lth", "snip", "ours"}},
          {"seeds", {1, 2}},
          {"saliency_batch", 16},
          {"out", out.string()}};
}

ErrorCode parse_code(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "config should have been rejected: " << text;
  return ErrorCode::State;
}

TEST(Experiment, Defaults) {
  const auto cfg = parse_experiment_config("");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(cfg.sparsities, (std::vector<double>{0.2, 0.4, 0.8}));
  EXPECT_EQ(cfg.methods.size(), 4u);
  EXPECT_EQ(cfg.train.epochs, 100u);
  EXPECT_FALSE(cfg.uses_files());
  EXPECT_NO_THROW(parse_experiment_config("{}"));
}

TEST(Experiment, RejectsInvalidConfigs) {
  EXPECT_EQ(parse_code("{"), ErrorCode::Config);
  EXPECT_EQ(parse_code("[]"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"bogus": 1})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"train": {"epoch": 3}})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"train": {"epochs": "three"}})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"sparsity": [0.0]})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"sparsity": [1.2]})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"methods": ["prune"]})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"methods": []})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"seeds": []})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"data": {"mi": "a"}})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"train_fraction": 1})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"jobs": 0})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"lth": {"rounds": 0}})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"arch": {"pool_width": 7}})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"train": {"lambda_mi": 0, "lambda_me": 0}})"), ErrorCode::Config);
  // Dense alone needs no sparsity levels.
  EXPECT_NO_THROW(parse_experiment_config(R"({"methods": ["dense"], "sparsity": []})"));
}

TEST(Experiment, ConfigJsonRoundTrip) {
  ScratchDir dir;
  const auto cfg = parse_experiment_config(tiny_config(dir / "o").dump());
  const std::string text = experiment_config_json(cfg);
  const auto again = parse_experiment_config(text);
  EXPECT_EQ(experiment_config_json(again), text);
  const auto j = json::parse(text);
  EXPECT_EQ(j["methods"], json({"dense", "lth", "snip", "ours"}));
  EXPECT_EQ(j["train"]["epochs"], 3);
  EXPECT_FALSE(j.contains("jobs"));  // the job count never changes results
}

TEST(Experiment, EnumerateRunsOrder) {
  ExperimentConfig cfg;
  cfg.methods = {PruneMethod::Snip, PruneMethod::Dense};
  cfg.sparsities = {0.8, 0.2, 0.8};
  cfg.seeds = {5, 1};
  const auto runs = enumerate_runs(cfg);
  ASSERT_EQ(runs.size(), 6u);
  const std::vector<std::tuple<PruneMethod, double, std::uint64_t>> want{
      {PruneMethod::Snip, 0.2, 5}, {PruneMethod::Snip, 0.2, 1}, {PruneMethod::Snip, 0.8, 5},
      {PruneMethod::Snip, 0.8, 1}, {PruneMethod::Dense, 0.0, 5}, {PruneMethod::Dense, 0.0, 1}};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    EXPECT_EQ(runs[i].method, std::get<0>(want[i]));
    EXPECT_EQ(runs[i].sparsity, std::get<1>(want[i]));
    EXPECT_EQ(runs[i].seed, std::get<2>(want[i]));
  }
}

TEST(Experiment, CurveNames) {
  EXPECT_EQ(curve_file_name({PruneMethod::Ours, 0.4, 3}), "ours_s40_seed3.csv");
  EXPECT_EQ(curve_file_name({PruneMethod::Dense, 0.0, 1}), "dense_s0_seed1.csv");
  EXPECT_EQ(curve_file_name({PruneMethod::Lth, 0.125, 2}), "lth_s12.5_seed2.csv");
}

TEST(Experiment, PrepareDataIsPerSeedAndFitsArch) {
  ScratchDir dir;
  const auto cfg = parse_experiment_config(tiny_config(dir / "o").dump());
  const auto a = prepare_data(cfg, 1);
  const auto b = prepare_data(cfg, 1);
  const auto c = prepare_data(cfg, 2);
  EXPECT_EQ(a.arch.channels, 4u);
  EXPECT_EQ(a.arch.samples, 32u);
  EXPECT_EQ(a.arch.classes, 3u);
  EXPECT_EQ(a.data.mi.train.trials[0].x, b.data.mi.train.trials[0].x);
  EXPECT_FALSE(a.data.mi.train.trials[0].x == c.data.mi.train.trials[0].x);
  EXPECT_EQ(a.data.mi.train.size() + a.data.mi.validation.size(), 24u);
}

TEST(Experiment, FileDatasets) {
  ScratchDir dir;
  auto j = tiny_config(dir / "o");
  auto cfg = parse_experiment_config(j.dump());
  const auto paths = run_generate(cfg);
  ASSERT_EQ(paths.size(), 2u);
  j["data"] = {{"mi", paths[0].string()}, {"me", paths[1].string()}};
  const auto files = parse_experiment_config(j.dump());
  EXPECT_TRUE(files.uses_files());
  const auto p1 = prepare_data(files, 1);
  const auto p2 = prepare_data(files, 2);
  EXPECT_EQ(p1.arch.channels, 4u);
  // Same trials across seeds, different split.
  EXPECT_NE(p1.data.me.validation.trials[0].x, p2.data.me.validation.trials[0].x);

  j["data"] = {{"mi", paths[1].string()}, {"me", paths[0].string()}};
  try {
    prepare_data(parse_experiment_config(j.dump()), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Format);
  }
}

TEST(Experiment, ExecuteRunWithGivenMasks) {
  ScratchDir dir;
  const auto cfg = parse_experiment_config(tiny_config(dir / "o").dump());
  const auto prepared = prepare_data(cfg, 1);
  const RunSpec spec{PruneMethod::Ours, 0.4, 1};
  const auto init = build_model(prepared.arch, 1);
  const auto masks = generate_masks(cfg, prepared, init, spec);
  const auto a = execute_run(cfg, prepared, spec);
  const auto b = execute_run(cfg, prepared, spec, &masks);
  ASSERT_FALSE(a.failed);
  EXPECT_EQ(a.record.final_params, b.record.final_params);
  EXPECT_EQ(a.record.masks, masks);
  EXPECT_EQ(a.record.method, "ours");
  EXPECT_EQ(a.final_score[1].accuracy, a.record.epochs.back().val_accuracy[1]);

  MaskSet wrong = masks;
  wrong.shared.pop_back();
  EXPECT_THROW(execute_run(cfg, prepared, spec, &wrong), Error);
}

TEST(Experiment, DivergenceBecomesFailedRun) {
  ScratchDir dir;
  auto j = tiny_config(dir / "o");
  j["train"]["learning_rate"] = 1e300;
  const auto cfg = parse_experiment_config(j.dump());
  const auto prepared = prepare_data(cfg, 1);
  const auto r = execute_run(cfg, prepared, {PruneMethod::Dense, 0.0, 1});
  EXPECT_TRUE(r.failed);
  EXPECT_FALSE(r.error.empty());
}

TEST(Experiment, SweepWritesArtifactsIndependentOfJobs) {
  ScratchDir dir;
  auto j = tiny_config(dir / "one");
  const auto one = run_sweep(parse_experiment_config(j.dump()));
  j["out"] = (dir / "two").string();
  j["jobs"] = 3;
  const auto two = run_sweep(parse_experiment_config(j.dump()));

  EXPECT_EQ(one.runs.size(), 2u + 3u * 2u * 2u);
  EXPECT_EQ(one.records.size(), 2 * one.runs.size());
  EXPECT_EQ(one.failed_runs, 0u);
  for (const char* f : {"report.csv", "report.md"})
    EXPECT_EQ(slurp(dir / "one" / f), slurp(dir / "two" / f)) << f;
  auto c1 = json::parse(slurp(dir / "one" / "config.json"));
  auto c2 = json::parse(slurp(dir / "two" / "config.json"));
  c1.erase("out");
  c2.erase("out");
  EXPECT_EQ(c1, c2);
  for (const auto& r : one.runs) {
    const auto name = curve_file_name(r.spec);
    const auto a = slurp(dir / "one" / "curves" / name);
    EXPECT_EQ(a, slurp(dir / "two" / "curves" / name)) << name;
    EXPECT_EQ(a.substr(0, a.find('\n')), "epoch,train_loss,val_loss_MI,val_loss_ME");
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 4);
  }

  const auto csv = slurp(dir / "one" / "report.csv");
  EXPECT_EQ(parse_report_csv(csv).size(), one.records.size());
  EXPECT_EQ(render_report(dir / "one"), slurp(dir / "one" / "report.md"));
  // The first data row is dense seed 1, MI before ME.
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 13), "dense,0,MI,1,");
}

TEST(Experiment, RenderReportErrors) {
  ScratchDir dir;
  EXPECT_THROW(render_report(dir.path()), Error);
  testing::spit(dir / "report.csv", "method,sparsity_pct,task,seed,accuracy,f1\n");
  EXPECT_THROW(render_report(dir.path()), Error);
}

}  // namespace
}  // namespace smt
