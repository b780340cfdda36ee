// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "smt/error.hpp"
#include "smt/pruning.hpp"
#include "support.hpp"

namespace smt {
namespace {

using testing::small_arch;
using testing::small_data;

// Oracle: rank by (score desc, index asc) with a full sort.
Mask sorted_topk(const std::vector<double>& s, std::size_t k) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  Mask m(s.size(), 0);
  for (std::size_t i = 0; i < k; ++i) m[idx[i]] = 1;
  return m;
}

std::size_t count(const Mask& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), 1)); }

TEST(Pruning, RetainedCount) {
  EXPECT_EQ(retained_count(10, 0.4), 6u);
  EXPECT_EQ(retained_count(10, 0.8), 2u);
  EXPECT_EQ(retained_count(5, 0.5), 3u);  // 2.5 rounds away from zero
  EXPECT_EQ(retained_count(3, 0.9), 1u);
  EXPECT_EQ(retained_count(1, 0.99), 1u);
  EXPECT_EQ(retained_count(1000, 0.2), 800u);
}

TEST(Pruning, TopIndicesMatchesSortOracle) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> s(n);
    for (auto& v : s) v = static_cast<double>(rng() % 6);  // many ties
    const std::size_t k = rng() % (n + 1);
    EXPECT_EQ(top_count_mask(s, k), sorted_topk(s, k));
    const auto idx = top_indices(s, k);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  }
  EXPECT_THROW(top_indices(std::vector<double>{1.0}, 2), Error);
  EXPECT_THROW(top_indices(std::vector<double>{std::nan("")}, 1), Error);
}

TEST(Pruning, TopkTiesGoToLowerIndex) {
  const std::vector<double> s{1.0, 2.0, 2.0, 2.0, 0.5};
  EXPECT_EQ(top_count_mask(s, 2), (Mask{0, 1, 1, 0, 0}));
  EXPECT_EQ(topk_mask(s, 0.4), (Mask{0, 1, 1, 1, 0}));
  EXPECT_THROW(topk_mask(s, 0.0), Error);
  EXPECT_THROW(topk_mask(s, 1.0), Error);
  EXPECT_THROW(topk_mask(std::vector<double>{}, 0.5), Error);
}

TEST(Pruning, ArbiterExhaustiveSmall) {
  for (std::size_t n = 0; n <= 6; ++n)
    for (std::uint32_t a = 0; a < (1u << n); ++a)
      for (std::uint32_t b = 0; b < (1u << n); ++b) {
        Mask ma(n), mb(n), want(n);
        for (std::size_t i = 0; i < n; ++i) {
          ma[i] = (a >> i) & 1;
          mb[i] = (b >> i) & 1;
          want[i] = ((a | b) >> i) & 1;
        }
        ASSERT_EQ(arbiter_or(ma, mb), want);
      }
  EXPECT_THROW(arbiter_or(Mask(2), Mask(3)), Error);
}

TEST(Pruning, MagnitudeMask) {
  const std::vector<double> theta{0.1, -3.0, 0.0, 2.0, -0.2};
  EXPECT_EQ(magnitude_mask(theta, 0.6), (Mask{0, 1, 0, 1, 0}));
}

TEST(Pruning, SaliencyBatch) {
  const auto data = small_data(1);
  SparsityConfig cfg;
  cfg.saliency_batch = 5;
  cfg.seed = 3;
  const auto b1 = saliency_batch(data.mi.train, cfg);
  const auto b2 = saliency_batch(data.mi.train, cfg);
  ASSERT_EQ(b1.size(), 5u);
  for (std::size_t i = 0; i < b1.size(); ++i) EXPECT_EQ(b1[i].x, b2[i].x);
  cfg.seed = 4;
  const auto b3 = saliency_batch(data.mi.train, cfg);
  bool differs = false;
  for (std::size_t i = 0; i < b1.size(); ++i) differs |= !(b1[i].x == b3[i].x);
  EXPECT_TRUE(differs);
  cfg.saliency_batch = 1000;
  EXPECT_EQ(saliency_batch(data.mi.train, cfg).size(), data.mi.train.size());
}

TEST(Pruning, SaliencyIsGradientTimesWeight) {
  const auto p = build_model(small_arch(), 2);
  const auto data = small_data(2);
  SparsityConfig cfg;
  cfg.saliency_batch = 6;
  const auto batch = saliency_batch(data.me.train, cfg);
  const auto s = saliency_scores(p, Task::ME, batch, cfg);
  const auto lg = task_loss_gradient(p, MaskSet::ones(p), batch, Task::ME);
  std::vector<double> want;
  for (auto g : {Group::Shared, Group::ME}) {
    const auto th = p.group(g).maskable_values();
    const auto gr = lg.grad.maskable_values(p, g);
    for (std::size_t j = 0; j < th.size(); ++j) want.push_back(std::abs(gr[j] * th[j]));
  }
  EXPECT_EQ(s.raw, want);
  EXPECT_EQ(s.shared_count, p.maskable(Group::Shared));
  const auto norm = s.normalized();
  EXPECT_NEAR(std::accumulate(norm.begin(), norm.end(), 0.0), 1.0, 1e-12);
}

TEST(Pruning, OursRespectsPerTaskBudgetAndArbiter) {
  const auto p = build_model(small_arch(), 3);
  const auto data = small_data(3);
  for (double sigma : {0.2, 0.4, 0.8}) {
    SparsityConfig cfg;
    cfg.sparsity = sigma;
    cfg.saliency_batch = 8;
    cfg.seed = 11;
    const auto r = generate_masks_ours_detailed(p, data.mi.train, data.me.train, cfg);
    for (auto task : {Task::MI, Task::ME}) {
      const std::size_t kappa = retained_count(p.task_maskable(task), sigma);
      EXPECT_EQ(task == Task::MI ? r.kappa_mi : r.kappa_me, kappa);
      const Mask& cand = task == Task::MI ? r.candidate_mi : r.candidate_me;
      EXPECT_EQ(count(cand) + r.masks.retained(private_group(task)), kappa);

      // Oracle: the joint selection over [shared | private].
      const auto batch = saliency_batch(task == Task::MI ? data.mi.train : data.me.train, cfg);
      const auto s = saliency_scores(p, task, batch, cfg);
      const Mask joint = sorted_topk(s.raw, kappa);
      EXPECT_EQ(Mask(joint.begin(), joint.begin() + static_cast<std::ptrdiff_t>(s.shared_count)),
                cand);
      EXPECT_EQ(Mask(joint.begin() + static_cast<std::ptrdiff_t>(s.shared_count), joint.end()),
                r.masks[private_group(task)]);
    }
    EXPECT_EQ(r.masks.shared, arbiter_or(r.candidate_mi, r.candidate_me));
    EXPECT_NO_THROW(r.masks.check_aligned(p));
    EXPECT_EQ(generate_masks_ours(p, data.mi.train, data.me.train, cfg), r.masks);
  }
}

TEST(Pruning, SnipKeepsGlobalBudget) {
  const auto p = build_model(small_arch(), 4);
  const auto data = small_data(4);
  for (double sigma : {0.2, 0.4, 0.8}) {
    SparsityConfig cfg;
    cfg.sparsity = sigma;
    cfg.saliency_batch = 8;
    const auto m = snip_global_masks(p, data.mi.train, data.me.train, cfg);
    std::size_t kept = 0;
    for (auto g : kGroups) kept += m.retained(g);
    EXPECT_EQ(kept, retained_count(p.total_maskable(), sigma));
    EXPECT_NO_THROW(m.check_aligned(p));
  }
}

TEST(Pruning, LthTargetSchedule) {
  EXPECT_EQ(lth_target(1000, 0.8, 5, 5), 200u);
  EXPECT_EQ(lth_target(1000, 0.8, 0, 5), 1000u);
  EXPECT_EQ(lth_target(1000, 0.8, 1, 5), static_cast<std::size_t>(std::lround(1000 * std::pow(0.2, 0.2))));
  EXPECT_EQ(lth_target(3, 0.99, 5, 5), 1u);
}

TEST(Pruning, LthNestedMasksFollowSchedule) {
  const auto init = build_model(small_arch(), 5);
  const auto data = small_data(5);
  SparsityConfig cfg;
  cfg.sparsity = 0.6;
  LthConfig lth;
  lth.rounds = 3;
  lth.budget_fraction = 0.5;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 9;
  const auto r = lth_masks_detailed(init, data, cfg, lth, tc);
  ASSERT_EQ(r.history.size(), 3u);
  for (std::size_t round = 0; round < 3; ++round)
    for (auto g : kGroups) {
      const auto& m = r.history[round][g];
      const std::size_t target = lth_target(init.maskable(g), 0.6, round + 1, 3);
      EXPECT_EQ(count(m), target);
      if (round > 0) {
        const auto& prev = r.history[round - 1][g];
        for (std::size_t j = 0; j < m.size(); ++j) EXPECT_LE(m[j], prev[j]);
      }
    }
  EXPECT_EQ(r.masks, r.history.back());
  EXPECT_EQ(lth_masks(init, data, cfg, lth, tc), r.masks);
}

TEST(Pruning, MethodNames) {
  for (auto m : {PruneMethod::Dense, PruneMethod::Lth, PruneMethod::Snip, PruneMethod::Ours})
    EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("magnitude"), Error);
}

TEST(Pruning, MaskFileRoundTrip) {
  testing::ScratchDir dir;
  const auto p = build_model(small_arch(), 6);
  MaskSet m = MaskSet::ones(p);
  std::mt19937_64 rng(2);
  for (auto g : kGroups)
    for (auto& b : m[g]) b = rng() & 1;
  save_masks(m, dir / "masks.bin");
  EXPECT_EQ(load_masks(dir / "masks.bin"), m);
  const std::string raw = testing::slurp(dir / "masks.bin");
  EXPECT_EQ(raw.substr(0, 8), "SMTMASK1");
  std::size_t expect = 8;
  for (auto g : kGroups) expect += 9 + (m[g].size() + 7) / 8;
  EXPECT_EQ(raw.size(), expect);

  testing::spit(dir / "bad.bin", "NOTAMASK" + raw.substr(8));
  EXPECT_THROW(load_masks(dir / "bad.bin"), Error);
  testing::spit(dir / "short.bin", raw.substr(0, raw.size() - 1));
  EXPECT_THROW(load_masks(dir / "short.bin"), Error);
  testing::spit(dir / "long.bin", raw + "x");
  EXPECT_THROW(load_masks(dir / "long.bin"), Error);
  EXPECT_THROW(load_masks(dir / "missing.bin"), Error);

  save_mask_sidecar(m, {"ours", 0.4, 3}, dir / "masks.json");
  const auto j = nlohmann::json::parse(testing::slurp(dir / "masks.json"));
  EXPECT_EQ(j["method"], "ours");
  EXPECT_EQ(j["sigma"], 0.4);
  EXPECT_EQ(j["seed"], 3);
  EXPECT_DOUBLE_EQ(j["density"]["MI"].get<double>(), m.density(Group::MI));
}

TEST(Pruning, ConfigValidation) {
  SparsityConfig cfg;
  cfg.sparsity = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.sparsity = 0.5;
  cfg.saliency_batch = 0;
  EXPECT_THROW(cfg.validate(), Error);
  LthConfig lth;
  lth.rounds = 0;
  EXPECT_THROW(lth.validate(), Error);
  lth.rounds = 2;
  lth.budget_fraction = 0.0;
  EXPECT_THROW(lth.validate(), Error);
}

}  // namespace
}  // namespace smt
