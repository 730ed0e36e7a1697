// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include <gtest/gtest.h>

#include "evd/checkpoint.hpp"
#include "evd/config.hpp"
#include "evd/error.hpp"
#include "test_util.hpp"

namespace evd {
namespace {

TEST(LossSpecText, Forms) {
  EXPECT_TRUE(std::holds_alternative<loss::Charbonnier>(parse_loss_spec("charbonnier")));
  const auto e = parse_loss_spec("pf_exp:lambda=1.0");
  ASSERT_TRUE(std::holds_alternative<loss::PixelFocusExp>(e));
  EXPECT_EQ(std::get<loss::PixelFocusExp>(e).lambda, 1.0);
  const auto p = parse_loss_spec("pixel_focus_power(a=0.2;b=0.1;g=3)");
  ASSERT_TRUE(std::holds_alternative<loss::PixelFocusPower>(p));
  EXPECT_EQ(std::get<loss::PixelFocusPower>(p).a, 0.2);
  EXPECT_EQ(std::get<loss::PixelFocusPower>(p).g, 3.0);
  EXPECT_EQ(std::get<loss::PixelFocusExp>(parse_loss_spec("pixel_focus_exp")).lambda, 1.1);
  EXPECT_THROW(parse_loss_spec("l2"), ParameterError);
  EXPECT_THROW(parse_loss_spec("pf_exp:mu=1"), ParameterError);
  EXPECT_THROW(parse_loss_spec("pf_exp:lambda=x"), ParameterError);
  EXPECT_THROW(parse_loss_spec("pf_power(a=0.2"), ParameterError);
}

TEST(RunConfigJson, DefaultsAndOverrides) {
  const auto d = parse_run_config("{}");
  EXPECT_EQ(d.train.stage1_epochs, 30u);
  EXPECT_EQ(d.model, swin::preset(swin::Preset::Tiny));

  const auto c = parse_run_config(R"({
    "model": {"preset": "small", "window": 4},
    "train": {"preset": "paper", "seed": 9, "crop": 128, "beta2": 0.99},
    "loss": {"type": "pixel_focus_exp", "lambda": 1.0},
    "dataset": "data/m.tsv", "out": "/abs/out"})",
                                  "/base");
  EXPECT_EQ(c.model.depth, 4u);
  EXPECT_EQ(c.model.window, 4u);
  EXPECT_EQ(c.train.stage1_epochs, 500u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.train.crop, 128u);
  EXPECT_EQ(c.train.adam.beta2, 0.99);
  EXPECT_EQ(std::get<loss::PixelFocusExp>(c.train.stage2_loss).lambda, 1.0);
  EXPECT_EQ(c.dataset, std::filesystem::path("/base/data/m.tsv"));
  EXPECT_EQ(c.out, std::filesystem::path("/abs/out"));
}

TEST(RunConfigJson, UnknownKeysAndBadValues) {
  try {
    parse_run_config(R"({"train": {"foo": 1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.foo"), std::string::npos) << e.what();
  }
  try {
    parse_run_config(R"({"bogus": 1})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'bogus'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_run_config(R"({"model": {"heads": 5}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"batch": 4}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"loss": {"type": "pf_exp", "lambda": 2.0}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"loss": {"lambda": 1.0}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"seed": "x"}})"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(RunConfigJson, DumpRoundTrip) {
  auto c = parse_run_config(R"({"model": {"depth": 3}, "train": {"lr1_init": 0.002},
                                "loss": {"type": "pf_power", "a": 0.2, "b": 0.1, "g": 1.5}})");
  c.out = "runs/x";
  const auto back = parse_run_config(dump_run_config(c));
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.train.lr1_init, 0.002);
  EXPECT_EQ(std::get<loss::PixelFocusPower>(back.train.stage2_loss).g, 1.5);
  EXPECT_EQ(back.out, c.out);
}

Checkpoint small_checkpoint() {
  swin::ModelConfig cfg;
  cfg.C = 8;
  cfg.stages = 2;
  cfg.depth = 1;
  cfg.window = 4;
  cfg.heads = 2;
  Checkpoint ck;
  ck.config = cfg;
  ck.params = swin::init_params(cfg);
  ck.extra.emplace("adam.m/stem.bias", Tensor({8}, std::vector<double>(8, 0.25)));
  ck.meta["global_step"] = "17";
  return ck;
}

TEST(CheckpointCodec, RoundTrip) {
  const auto ck = small_checkpoint();
  const auto bytes = encode_checkpoint(ck);
  const std::string head(bytes.begin(), bytes.begin() + 9);
  EXPECT_EQ(head, "EVDCKPT1\n");
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.meta, ck.meta);
  ASSERT_EQ(back.params.size(), ck.params.size());
  for (const auto& [k, t] : ck.params) {
    const auto& u = back.params.at(k);
    EXPECT_EQ(u.shape(), t.shape());
    EXPECT_TRUE(std::equal(t.values().begin(), t.values().end(), u.values().begin()));
  }
  EXPECT_EQ(back.extra.at("adam.m/stem.bias").values()[3], 0.25);
  EXPECT_EQ(encode_checkpoint(back), bytes);

  test::TempDir dir("ckpt");
  save_checkpoint(dir / "a.ckpt", ck);
  EXPECT_EQ(encode_checkpoint(load_checkpoint(dir / "a.ckpt")), bytes);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), DataError);
}

TEST(CheckpointCodec, Corruption) {
  auto bytes = encode_checkpoint(small_checkpoint());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), CodecError);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 8);
  EXPECT_THROW(decode_checkpoint(cut), CodecError);
  std::vector<std::uint8_t> header_only(bytes.begin(), bytes.begin() + 20);
  EXPECT_THROW(decode_checkpoint(header_only), CodecError);
}

TEST(CheckpointCodec, Compatibility) {
  const auto ck = small_checkpoint();
  EXPECT_NO_THROW(check_compatible(ck, ck.config));
  auto deeper = ck.config;
  deeper.depth = 2;
  try {
    check_compatible(ck, deeper);
    FAIL();
  } catch (const StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("block1"), std::string::npos) << e.what();
  }
  auto wider = ck.config;
  wider.C = 16;
  EXPECT_THROW(check_compatible(ck, wider), StructuralError);
}

}  // namespace
}  // namespace evd
