// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "smt/error.hpp"
#include "smt/pruning.hpp"
#include "smt/training.hpp"
#include "support.hpp"

namespace smt {
namespace {

using testing::small_arch;
using testing::small_data;

TrainConfig quick(std::size_t epochs = 3) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 8;
  tc.learning_rate = 3e-3;
  tc.seed = 17;
  return tc;
}

MaskSet random_mask(const ParameterPartition& p, double keep, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(keep);
  MaskSet m = MaskSet::ones(p);
  for (auto g : kGroups)
    for (auto& x : m[g]) x = b(rng);
  return m;
}

TEST(Training, ApplyMasksZeroesOnlyMaskedWeights) {
  const auto p = build_model(small_arch(), 1);
  const auto m = random_mask(p, 0.5, 2);
  const auto q = apply_masks(p, m);
  for (auto g : kGroups) {
    const auto a = p.group(g).maskable_values();
    const auto b = q.group(g).maskable_values();
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(b[j], m[g][j] ? a[j] : 0.0);
  }
}

// One full-batch step has a closed form: m = (1-b1) g, v = (1-b2) g^2 and,
// after bias correction, theta -= lr * g / (|g| + eps).
TEST(Training, FirstAdamStepMatchesClosedForm) {
  auto p = build_model(small_arch(), 3);
  const auto data = small_data(3);
  const MaskSet m = random_mask(p, 0.7, 4);
  TrainConfig tc = quick(1);
  tc.batch_size = 1000;
  const auto start = apply_masks(p, m);
  const auto lg = multitask_loss_gradient(start, m, data.mi.train.trials, data.me.train.trials,
                                          tc.weights);
  bool seen = false;
  train(p, m, data, tc, [&](const StepView& v) {
    ASSERT_EQ(v.step, 1u);
    seen = true;
    for (auto g : kGroups)
      for (std::size_t i = 0; i < lg.grad[g].size(); ++i)
        for (std::size_t j = 0; j < lg.grad[g][i].size(); ++j) {
          const double gr = lg.grad[g][i][j];
          const double th0 = start.group(g).entries[i].value[j];
          EXPECT_NEAR(v.first_moment[g][i][j], (1 - tc.beta1) * gr, 1e-14);
          EXPECT_NEAR(v.second_moment[g][i][j], (1 - tc.beta2) * gr * gr, 1e-14);
          const double want = th0 - tc.learning_rate * gr / (std::abs(gr) + tc.epsilon);
          EXPECT_NEAR(v.params.group(g).entries[i].value[j], want, 1e-6 * tc.learning_rate);
        }
  });
  EXPECT_TRUE(seen);
}

TEST(Training, StaticMaskInvariantEveryStep) {
  auto p = build_model(small_arch(), 5);
  const auto data = small_data(5);
  const MaskSet m = random_mask(p, 0.4, 6);
  std::size_t steps = 0;
  train(p, m, data, quick(4), [&](const StepView& v) {
    ++steps;
    for (auto g : kGroups) {
      const auto th = v.params.group(g).maskable_values();
      const auto m1 = v.first_moment.maskable_values(v.params, g);
      const auto m2 = v.second_moment.maskable_values(v.params, g);
      for (std::size_t j = 0; j < th.size(); ++j)
        if (!m[g][j]) {
          ASSERT_EQ(std::bit_cast<std::uint64_t>(th[j]), 0u);
          ASSERT_EQ(std::bit_cast<std::uint64_t>(m1[j]), 0u);
          ASSERT_EQ(std::bit_cast<std::uint64_t>(m2[j]), 0u);
        }
    }
  });
  EXPECT_EQ(steps, 4u * 3u);  // 24 training trials per task at batch 8
}

TEST(Training, AllZeroMaskFreezesEveryWeight) {
  auto p = build_model(small_arch(), 6);
  const auto data = small_data(6);
  const MaskSet zeros = MaskSet::zeros(p);
  train(p, zeros, data, quick(2));
  for (auto g : kGroups)
    for (double v : p.group(g).maskable_values()) EXPECT_EQ(v, 0.0);
}

TEST(Training, DeterministicAndSeedSensitive) {
  const auto data = small_data(7);
  const auto init = build_model(small_arch(), 7);
  const auto m = MaskSet::ones(init);
  auto a = init, b = init, c = init;
  const auto ra = train(a, m, data, quick());
  const auto rb = train(b, m, data, quick());
  EXPECT_EQ(a, b);
  for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
    EXPECT_EQ(ra.epochs[e].train_loss, rb.epochs[e].train_loss);
    EXPECT_EQ(ra.epochs[e].val_loss[1], rb.epochs[e].val_loss[1]);
  }
  auto tc = quick();
  tc.seed = 18;
  train(c, m, data, tc);
  EXPECT_FALSE(a == c);
}

TEST(Training, LossDecreasesAndRecordIsComplete) {
  const auto data = small_data(8);
  auto p = build_model(small_arch(), 8);
  const auto rec = train(p, MaskSet::ones(p), data, quick(15));
  ASSERT_EQ(rec.epochs.size(), 15u);
  EXPECT_LT(rec.epochs.back().train_loss, rec.epochs.front().train_loss);
  for (std::size_t e = 0; e < rec.epochs.size(); ++e) {
    EXPECT_EQ(rec.epochs[e].epoch, e + 1);
    for (int k = 0; k < 2; ++k) {
      EXPECT_GE(rec.epochs[e].val_accuracy[k], 0.0);
      EXPECT_LE(rec.epochs[e].val_accuracy[k], 1.0);
    }
  }
  EXPECT_EQ(rec.final_params, p);
  const auto sc = score_task(p, rec.masks, data.me.validation, Task::ME);
  EXPECT_EQ(sc.loss, rec.epochs.back().val_loss[1]);
  EXPECT_EQ(sc.accuracy, rec.epochs.back().val_accuracy[1]);
}

TEST(Training, ValidateEveryCarriesForward) {
  const auto data = small_data(9);
  auto p = build_model(small_arch(), 9);
  auto tc = quick(5);
  tc.validate_every = 3;
  const auto rec = train(p, MaskSet::ones(p), data, tc);
  // Validated at epochs 1, 3 and 5; 2 repeats 1 and 4 repeats 3.
  EXPECT_EQ(rec.epochs[1].val_loss[0], rec.epochs[0].val_loss[0]);
  EXPECT_EQ(rec.epochs[3].val_loss[0], rec.epochs[2].val_loss[0]);
  EXPECT_NE(rec.epochs[2].val_loss[0], rec.epochs[0].val_loss[0]);
}

TEST(Training, NonFiniteLossRaisesDivergence) {
  auto data = small_data(10);
  data.mi.train.trials[0].x[0] = std::numeric_limits<double>::infinity();
  auto p = build_model(small_arch(), 10);
  auto tc = quick(2);
  tc.batch_size = 1000;
  try {
    train(p, MaskSet::ones(p), data, tc);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1u);
    EXPECT_EQ(e.step(), 1u);
    EXPECT_EQ(e.code(), ErrorCode::Divergence);
  }
}

TEST(Training, ConfigAndInputValidation) {
  const auto data = small_data(11);
  auto p = build_model(small_arch(), 11);
  const auto ones = MaskSet::ones(p);
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& c) { c.epochs = 0; }, [](TrainConfig& c) { c.batch_size = 0; },
           [](TrainConfig& c) { c.learning_rate = 0; }, [](TrainConfig& c) { c.beta1 = 1.0; },
           [](TrainConfig& c) { c.epsilon = 0; }, [](TrainConfig& c) { c.validate_every = 0; },
           [](TrainConfig& c) { c.weights = {0, 0}; }}) {
    auto tc = quick(1);
    mutate(tc);
    EXPECT_THROW(train(p, ones, data, tc), Error);
  }
  auto empty = data;
  empty.me.validation.trials.clear();
  EXPECT_THROW(train(p, ones, empty, quick(1)), Error);
  MaskSet short_mask = ones;
  short_mask.mi.pop_back();
  EXPECT_THROW(train(p, short_mask, data, quick(1)), Error);
}

TEST(Training, ParamsFileRoundTripIsBitExact) {
  testing::ScratchDir dir;
  auto p = build_model(small_arch(), 12);
  p.group(Group::MI).entries[1].value[0] = -0.0;
  p.group(Group::ME).entries[3].value[1] = 1e-310;
  save_params(p, dir / "params.bin");
  const auto q = load_params(build_model(small_arch(), 99), dir / "params.bin");
  for (auto g : kGroups)
    for (std::size_t i = 0; i < p.group(g).entries.size(); ++i)
      for (std::size_t j = 0; j < p.group(g).entries[i].value.size(); ++j)
        ASSERT_EQ(std::bit_cast<std::uint64_t>(q.group(g).entries[i].value[j]),
                  std::bit_cast<std::uint64_t>(p.group(g).entries[i].value[j]));
  const std::string raw = testing::slurp(dir / "params.bin");
  EXPECT_EQ(raw.substr(0, 7), "SMTPAR1");
  EXPECT_EQ(raw.size(), 7 + 3 * 9 + 8 * p.total_parameters());

  auto other = small_arch();
  other.embedding = 6;
  EXPECT_THROW(load_params(build_model(other, 1), dir / "params.bin"), Error);
  testing::spit(dir / "v2.bin", "SMTPAR2" + raw.substr(7));
  try {
    load_params(p, dir / "v2.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Format);
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  testing::spit(dir / "trunc.bin", raw.substr(0, raw.size() - 3));
  EXPECT_THROW(load_params(p, dir / "trunc.bin"), Error);
}

TEST(Training, RunDirectoryRoundTrip) {
  testing::ScratchDir dir;
  const auto data = small_data(13);
  auto p = build_model(small_arch(), 13);
  const auto m = random_mask(p, 0.6, 1);
  auto rec = train(p, m, data, quick(2));
  rec.method = "ours";
  rec.sparsity = 0.4;
  rec.mask_seed = 13;
  save_run(rec, dir / "run");
  for (const char* f : {"record.json", "params.bin", "masks.bin", "masks.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / f)) << f;
  const auto back = load_run(dir / "run");
  EXPECT_EQ(back.final_params, rec.final_params);
  EXPECT_EQ(back.masks, rec.masks);
  EXPECT_EQ(back.method, "ours");
  EXPECT_EQ(back.sparsity, 0.4);
  EXPECT_EQ(back.mask_seed, 13u);
  EXPECT_EQ(back.config.seed, rec.config.seed);
  ASSERT_EQ(back.epochs.size(), 2u);
  EXPECT_EQ(back.epochs[1].train_loss, rec.epochs[1].train_loss);
  EXPECT_EQ(back.epochs[1].val_f1[0], rec.epochs[1].val_f1[0]);

  // Saving twice yields identical bytes: nothing time-dependent is persisted.
  const auto first = testing::slurp(dir / "run" / "record.json");
  save_run(rec, dir / "run");
  EXPECT_EQ(testing::slurp(dir / "run" / "record.json"), first);

  auto j = nlohmann::json::parse(first);
  j["format_version"] = 2;
  testing::spit(dir / "run" / "record.json", j.dump());
  EXPECT_THROW(load_run(dir / "run"), Error);
  EXPECT_THROW(load_run(dir / "missing"), Error);
}

}  // namespace
}  // namespace smt
