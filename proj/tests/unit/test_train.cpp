// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "evd/checkpoint.hpp"
#include "evd/error.hpp"
#include "evd/synthetic.hpp"
#include "evd/train.hpp"
#include "test_util.hpp"

namespace evd {
namespace {

// A small network so full training loops stay quick.
swin::ModelConfig mini_model() {
  swin::ModelConfig c;
  c.C = 8;
  c.stages = 2;
  c.depth = 1;
  c.window = 4;
  c.heads = 2;
  c.mlp_ratio = 2.0;
  return c;
}

train::TrainConfig mini_train() {
  train::TrainConfig t;
  t.stage1_epochs = 3;
  t.stage2_epochs = 2;
  t.lr1_init = 1e-3;
  t.lr2_init = 1e-4;
  t.crop = 16;
  t.seed = 5;
  return t;
}

const train::Dataset& mini_data() {
  static const auto data = synthetic::make_dataset(3, 24, 20, 11, make_hybridevs_pattern());
  return data;
}

bool same_params(const swin::ModelParams& a, const swin::ModelParams& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, t] : a) {
    const auto u = b.at(k).values();
    if (!std::equal(t.values().begin(), t.values().end(), u.begin(), u.end())) return false;
  }
  return true;
}

TEST(CosineLr, Examples) {
  EXPECT_EQ(train::cosine_lr(0, 100, 1e-3), 1e-3);
  EXPECT_EQ(train::cosine_lr(100, 100, 1e-3), 0.0);
  EXPECT_NEAR(train::cosine_lr(50, 100, 1e-3), 5e-4, 1e-18);
  double prev = 1.0;
  for (std::size_t s = 0; s <= 37; ++s) {
    const double lr = train::cosine_lr(s, 37, 1.0);
    EXPECT_LE(lr, prev);
    EXPECT_NEAR(lr, 0.5 * (1 + std::cos(std::numbers::pi * s / 37.0)), 1e-15);
    prev = lr;
  }
  EXPECT_THROW(train::cosine_lr(101, 100, 1e-3), ParameterError);
  EXPECT_THROW(train::cosine_lr(0, 0, 1e-3), ParameterError);
}

TEST(RandomCrop, IdentityPhaseAndDeterminism) {
  const auto& s = mini_data()[0];
  std::mt19937_64 rng(1);
  {
    const auto img = synthetic::make_dataset(1, 16, 16, 3, make_hybridevs_pattern())[0];
    train::CropOffset off;
    const auto [r, g] = train::random_crop(img.raw, img.gt, 16, rng, &off);
    EXPECT_EQ(r, img.raw);
    EXPECT_EQ(g.data, img.gt.data);
    EXPECT_EQ(off.x, 0u);
    EXPECT_EQ(off.y, 0u);
  }
  std::vector<std::pair<std::size_t, std::size_t>> first, second;
  for (int run = 0; run < 2; ++run) {
    std::mt19937_64 r2(42);
    for (int i = 0; i < 50; ++i) {
      train::CropOffset off;
      const auto [raw, gt] = train::random_crop(s.raw, s.gt, 8, r2, &off);
      EXPECT_EQ(off.x % 4, 0u);
      EXPECT_EQ(off.y % 4, 0u);
      EXPECT_EQ(raw.width, 8u);
      EXPECT_EQ(gt.height, 8u);
      // Crop is co-located and keeps the pattern phase.
      EXPECT_EQ(raw.at(1, 1), kHoleSentinel);
      EXPECT_EQ(raw.at(3, 2), s.raw.at(off.y + 3, off.x + 2));
      EXPECT_EQ(gt.at(5, 6, 1), s.gt.at(off.y + 5, off.x + 6, 1));
      (run ? second : first).emplace_back(off.x, off.y);
    }
  }
  EXPECT_EQ(first, second);
  EXPECT_THROW(train::random_crop(s.raw, s.gt, 32, rng), DataError);
  EXPECT_THROW(train::random_crop(s.raw, s.gt, 6, rng), ParameterError);
}

TEST(Adam, Examples) {
  swin::ModelParams p;
  p.emplace("w", Tensor({2}, {1.0, -2.0}, true));
  train::AdamState st;
  const train::AdamHyper hyper;
  train::optimizer_step(p, {{"w", {0.5, 0.5}}}, st, 0.0, hyper);
  EXPECT_EQ(p.at("w").values()[0], 1.0);
  EXPECT_EQ(p.at("w").values()[1], -2.0);
  train::AdamState zero_state;
  train::optimizer_step(p, {{"w", {0.0, 0.0}}}, zero_state, 1e-2, hyper);
  EXPECT_EQ(p.at("w").values()[0], 1.0);

  // f(theta) = theta^2 from theta = 1.
  swin::ModelParams q;
  q.emplace("t", Tensor({1}, {1.0}, true));
  train::AdamState s;
  train::optimizer_step(q, {{"t", {2.0}}}, s, 0.1, hyper);
  const double t = q.at("t").values()[0];
  EXPECT_LT(t * t, 1.0);
  // First bias-corrected step has magnitude lr.
  EXPECT_NEAR(t, 0.9, 1e-9);
  EXPECT_EQ(s.step, 1u);

  EXPECT_THROW(train::optimizer_step(q, {{"u", {1.0}}}, s, 0.1, hyper), StructuralError);
  EXPECT_THROW(train::optimizer_step(q, {}, s, 0.1, hyper), StructuralError);
}

TEST(TrainConfig, ValidateAndDesk) {
  train::TrainConfig c;
  EXPECT_EQ(c.stage1_epochs, 500u);
  EXPECT_EQ(c.stage2_epochs, 200u);
  EXPECT_EQ(c.lr1_init, 1e-4);
  EXPECT_EQ(c.lr2_init, 1e-5);
  EXPECT_EQ(c.crop, 640u);
  EXPECT_EQ(c.batch, 1u);
  EXPECT_NO_THROW(c.validate());
  c.batch = 2;
  EXPECT_THROW(c.validate(), ParameterError);
  const auto d = train::TrainConfig::desk();
  EXPECT_EQ(d.stage1_epochs, 30u);
  EXPECT_EQ(d.stage2_epochs, 10u);
}

TEST(TrainStage, ZeroEpochs) {
  const auto model = mini_model();
  train::TrainState st{swin::init_params(model), {}, 0};
  const auto before = train::clone_params(st.params);
  const auto h = train::train_stage(st, model, mini_data(), mini_train(), loss::Charbonnier{}, 1, 0, 1e-3, 0);
  EXPECT_TRUE(h.steps.empty());
  EXPECT_TRUE(same_params(before, st.params));
}

TEST(TwoStage, HistoryLrBoundariesAndDeterminism) {
  const auto model = mini_model();
  const auto cfg = mini_train();
  const auto a = train::two_stage_train(model, mini_data(), cfg);
  const std::size_t n = mini_data().size();
  ASSERT_EQ(a.history.steps.size(), (cfg.stage1_epochs + cfg.stage2_epochs) * n);
  for (std::size_t i = 0; i < a.history.steps.size(); ++i) {
    const auto& r = a.history.steps[i];
    EXPECT_EQ(r.step, i);
    const bool first = i < cfg.stage1_epochs * n;
    EXPECT_EQ(r.stage, first ? 1 : 2);
    const double expect = first ? train::cosine_lr(i, cfg.stage1_epochs * n, cfg.lr1_init)
                                : train::cosine_lr(i - cfg.stage1_epochs * n, cfg.stage2_epochs * n, cfg.lr2_init);
    EXPECT_EQ(r.lr, expect);
    EXPECT_TRUE(std::isfinite(r.loss));
  }
  EXPECT_EQ(a.state.global_step, a.history.steps.size());

  const auto b = train::two_stage_train(model, mini_data(), cfg);
  EXPECT_TRUE(same_params(a.state.params, b.state.params));
  for (std::size_t i = 0; i < a.history.steps.size(); ++i) EXPECT_EQ(a.history.steps[i].loss, b.history.steps[i].loss);

  auto other = cfg;
  other.seed = 6;
  EXPECT_FALSE(same_params(a.state.params, train::two_stage_train(model, mini_data(), other).state.params));
}

TEST(TwoStage, NoSecondStageMatchesStageOne) {
  const auto model = mini_model();
  auto cfg = mini_train();
  cfg.stage2_epochs = 0;
  const auto r = train::two_stage_train(model, mini_data(), cfg);
  EXPECT_TRUE(same_params(r.state.params, r.stage1_params));
  EXPECT_EQ(r.history.steps.size(), cfg.stage1_epochs * mini_data().size());
}

TEST(TwoStage, ResumeIsExact) {
  const auto model = mini_model();
  auto cfg = mini_train();
  const auto full = train::two_stage_train(model, mini_data(), cfg);

  // Stop after step 4 (inside stage 1) and after step 10 (inside stage 2).
  for (std::size_t stop : {4u, 10u}) {
    std::optional<train::TrainState> saved;
    train::Hooks hooks;
    hooks.on_checkpoint = [&](const train::TrainState& s) {
      if (s.global_step == stop) saved = train::from_checkpoint(decode_checkpoint(encode_checkpoint(train::to_checkpoint(s, model))), model);
    };
    auto ck = cfg;
    ck.checkpoint_every = 1;
    train::two_stage_train(model, mini_data(), ck, nullptr, hooks);
    ASSERT_TRUE(saved.has_value());
    EXPECT_EQ(saved->global_step, stop);
    const auto resumed = train::two_stage_train(model, mini_data(), cfg, &*saved);
    EXPECT_TRUE(same_params(full.state.params, resumed.state.params)) << "stop " << stop;
    ASSERT_FALSE(resumed.history.steps.empty());
    EXPECT_EQ(resumed.history.steps.front().step, stop);
    EXPECT_EQ(resumed.history.steps.back().step, full.history.steps.back().step);
  }
}

TEST(TwoStage, StageTwoLosses) {
  const auto model = mini_model();
  auto cfg = mini_train();
  cfg.stage1_epochs = 1;
  cfg.stage2_epochs = 1;
  for (const loss::LossSpec& spec : std::vector<loss::LossSpec>{loss::Charbonnier{}, loss::PixelFocusPower{},
                                                               loss::PixelFocusExp{1.0}, loss::PixelFocusExp{1.1}}) {
    cfg.stage2_loss = spec;
    const auto r = train::two_stage_train(model, mini_data(), cfg);
    for (const auto& s : r.history.steps) EXPECT_TRUE(std::isfinite(s.loss));
  }
  cfg.stage2_loss = loss::PixelFocusExp{2.0};
  EXPECT_THROW(train::two_stage_train(model, mini_data(), cfg), ParameterError);
}

TEST(TwoStage, NonFiniteLossAborts) {
  const auto model = mini_model();
  auto cfg = mini_train();
  cfg.lr1_init = 1e300;
  cfg.stage1_epochs = 4;
  try {
    train::two_stage_train(model, mini_data(), cfg);
    FAIL() << "expected abort";
  } catch (const train::TrainingAborted& e) {
    ASSERT_FALSE(e.history().steps.empty());
    EXPECT_EQ(e.history().steps.back().step, e.step());
    EXPECT_TRUE(std::isnan(e.history().steps.back().loss));
  }
}

TEST(TwoStage, EpochEval) {
  const auto model = mini_model();
  auto cfg = mini_train();
  cfg.eval_every = 1;
  cfg.stage2_epochs = 1;
  const auto r = train::two_stage_train(model, mini_data(), cfg);
  ASSERT_EQ(r.history.epochs.size(), 4u);
  EXPECT_EQ(r.history.epochs[3].stage, 2);
  for (const auto& e : r.history.epochs) {
    EXPECT_TRUE(std::isfinite(e.psnr));
    EXPECT_GT(e.ssim, -1.0);
  }
}

TEST(History, CsvRoundTrip) {
  train::TrainHistory h;
  h.steps.push_back({0, 1, 1e-3, 0.123456789012345678, 0.5});
  h.steps.push_back({1, 2, 1.0 / 3.0, std::nan(""), 0.25});
  std::stringstream ss;
  train::write_history_csv(ss, h);
  EXPECT_EQ(ss.str().substr(0, 25), "step,stage,lr,loss,grad_n");
  const auto back = train::read_history_csv(ss);
  ASSERT_EQ(back.steps.size(), 2u);
  EXPECT_EQ(back.steps[0].loss, h.steps[0].loss);
  EXPECT_EQ(back.steps[1].lr, h.steps[1].lr);
  EXPECT_EQ(back.steps[1].stage, 2);
  EXPECT_TRUE(std::isnan(back.steps[1].loss));
}

TEST(Dataset, LoadManifest) {
  test::TempDir dir("ds");
  const auto& s = mini_data()[0];
  std::filesystem::create_directories(dir / "raw");
  write_hevs(s.raw, dir / "raw" / "a.hevs");
  write_png(dir / "a.png", s.gt, 16);
  std::ofstream(dir / "m.tsv") << "# comment\n\nraw/a.hevs\ta.png\n";
  const auto ds = train::load_dataset(dir / "m.tsv");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].id, "a");
  EXPECT_EQ(ds[0].raw, s.raw);
  std::ofstream(dir / "bad.tsv") << "raw/a.hevs\n";
  EXPECT_THROW(train::load_dataset(dir / "bad.tsv"), DataError);
  std::ofstream(dir / "empty.tsv") << "# nothing\n";
  EXPECT_THROW(train::load_dataset(dir / "empty.tsv"), DataError);
  EXPECT_THROW(train::load_dataset(dir / "missing.tsv"), DataError);
}

}  // namespace
}  // namespace evd
