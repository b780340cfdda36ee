// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0
//
// Runs the installed command-line tool as a subprocess.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "support.hpp"

namespace {

using nlohmann::json;
using smt::testing::ScratchDir;
using smt::testing::slurp;
using smt::testing::spit;

struct Result {
  int code;
  std::string out;
};

// `env` is prepended verbatim, e.g. "SMT_SEED=4".
Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      "env -u SMT_SEED " + env + " '" SMT_CLI_PATH "' " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  Result r{-1, {}};
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = {{"data", {{"synthetic", {{"channels", 4}, {"samples", 32}, {"trials_per_class", 8}}}}},
               {"arch",
                {{"temporal_filters", 2}, {"temporal_kernel", 5}, {"spatial_filters", 2},
                 {"pool_width", 4}, {"embedding", 6}, {"head_hidden", 4}}},
               {"train", {{"epochs", 2}, {"batch_size", 8}}},
               {"lth", {{"rounds", 2}}},
               {"sparsity", {0.4}},
               {"methods", {"dense", "ours"}},
               {"seeds", {1}}};
    write_config();
  }
  void write_config() { spit(cfg_path(), config_.dump()); }
  std::string cfg_path() const { return (dir_ / "cfg.json").string(); }
  std::string base() const { return "--config " + cfg_path(); }

  ScratchDir dir_{"smt_cli"};
  json config_;
};

TEST_F(Cli, HelpAndUsageErrors) {
  const auto help = run("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("sweep"), std::string::npos);
  EXPECT_NE(help.out.find("SMT_SEED"), std::string::npos);
  EXPECT_EQ(run("sweep --help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("sweep --no-such-flag").code, 1);
  EXPECT_EQ(run("sweep --method magic").code, 1);
  EXPECT_EQ(run("sweep --jobs 0").code, 1);
  EXPECT_EQ(run("sweep --sparsity 1.5 --out " + (dir_ / "o").string()).code, 1);
  EXPECT_EQ(run("sweep --config " + (dir_ / "absent.json").string()).code, 1);
  EXPECT_EQ(run("--version").code, 0);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  spit(cfg_path(), "{ not json");
  EXPECT_EQ(run("sweep " + base()).code, 1);
  spit(cfg_path(), R"({"trian": {}})");
  const auto r = run("sweep " + base());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("trian"), std::string::npos);
}

TEST_F(Cli, DataErrorsExitTwo) {
  config_["data"] = {{"mi", (dir_ / "nope" / "MI").string()}, {"me", (dir_ / "nope" / "ME").string()}};
  write_config();
  EXPECT_EQ(run("train " + base() + " --out " + (dir_ / "o").string()).code, 2);
  EXPECT_EQ(run("report " + (dir_ / "nothing").string()).code, 2);
}

TEST_F(Cli, DivergenceExitsThree) {
  config_["train"]["learning_rate"] = 1e300;
  write_config();
  EXPECT_EQ(run("train " + base() + " --method dense --out " + (dir_ / "t").string()).code, 3);
  const auto r = run("sweep " + base() + " --method dense --out " + (dir_ / "s").string());
  EXPECT_EQ(r.code, 3);
  // The failed run is still reported.
  EXPECT_NE(slurp(dir_ / "s" / "report.csv").find("dense,0,MI,1,nan,nan"), std::string::npos);
}

TEST_F(Cli, GenerateThenTrainOnFiles) {
  const auto g = run("generate " + base() + " --out " + (dir_ / "data").string());
  ASSERT_EQ(g.code, 0) << g.out;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "data" / "MI" / "trials.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "data" / "ME" / "meta.json"));
  config_["data"] = {{"mi", (dir_ / "data" / "MI").string()}, {"me", (dir_ / "data" / "ME").string()}};
  write_config();
  const auto t = run("train " + base() + " --method dense --out " + (dir_ / "o").string());
  ASSERT_EQ(t.code, 0) << t.out;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "o" / "runs" / "dense_s0_seed1" / "record.json"));
}

TEST_F(Cli, MasksAndTrainCells) {
  const std::string out = (dir_ / "o").string();
  const auto m = run("masks " + base() + " --method ours --sparsity 0.4 --sparsity 0.8 --seed 2 --out " + out);
  ASSERT_EQ(m.code, 0) << m.out;
  for (const char* cell : {"ours_s40_seed2", "ours_s80_seed2"})
    EXPECT_TRUE(std::filesystem::exists(dir_ / "o" / "masks" / cell / "masks.bin")) << cell;

  const std::string masks = (dir_ / "o" / "masks" / "ours_s40_seed2" / "masks.bin").string();
  const auto t = run("train " + base() + " --method ours --sparsity 0.4 --seed 2 --masks " + masks +
                     " --out " + out);
  ASSERT_EQ(t.code, 0) << t.out;
  const auto t2 = run("train " + base() + " --method ours --sparsity 0.4 --seed 2 --out " +
                      (dir_ / "o2").string());
  ASSERT_EQ(t2.code, 0) << t2.out;
  EXPECT_EQ(slurp(dir_ / "o" / "runs" / "ours_s40_seed2" / "params.bin"),
            slurp(dir_ / "o2" / "runs" / "ours_s40_seed2" / "params.bin"));
  // --masks is ambiguous over several cells.
  EXPECT_EQ(run("train " + base() + " --masks " + masks + " --out " + out).code, 1);
}

TEST_F(Cli, SweepIsDeterministicAndReportRenders) {
  const std::string a = (dir_ / "a").string(), b = (dir_ / "b").string();
  ASSERT_EQ(run("sweep " + base() + " --out " + a).code, 0);
  ASSERT_EQ(run("sweep " + base() + " --jobs 2 --out " + b).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "report.csv"), slurp(dir_ / "b" / "report.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "curves" / "ours_s40_seed1.csv"),
            slurp(dir_ / "b" / "curves" / "ours_s40_seed1.csv"));
  const auto r = run("report " + a);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(dir_ / "a" / "report.md"));
  EXPECT_EQ(run("report --out " + a).out, r.out);
}

TEST_F(Cli, SeedPrecedence) {
  config_.erase("seeds");
  write_config();
  const std::string out = (dir_ / "e").string();
  ASSERT_EQ(run("sweep " + base() + " --method dense --out " + out, "SMT_SEED=6").code, 0);
  auto cfg = json::parse(slurp(dir_ / "e" / "config.json"));
  EXPECT_EQ(cfg["seeds"], json({6}));
  EXPECT_EQ(cfg["data"]["synthetic"]["seed"], 6);

  // A flag beats the environment.
  ASSERT_EQ(run("sweep " + base() + " --method dense --seed 8 --out " + out, "SMT_SEED=6").code, 0);
  cfg = json::parse(slurp(dir_ / "e" / "config.json"));
  EXPECT_EQ(cfg["seeds"], json({8}));

  // The config file beats the environment.
  config_["seeds"] = {3};
  write_config();
  ASSERT_EQ(run("sweep " + base() + " --method dense --out " + out, "SMT_SEED=6").code, 0);
  cfg = json::parse(slurp(dir_ / "e" / "config.json"));
  EXPECT_EQ(cfg["seeds"], json({3}));

  EXPECT_EQ(run("sweep " + base() + " --out " + out, "SMT_SEED=abc").code, 1);
}

}  // namespace
