// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "evd/losses.hpp"
#include "evd/swin.hpp"
#include "evd/train.hpp"

namespace evd {

/// A training/evaluation run as read from a JSON document:
///
///   {
///     "model":   {"preset": "tiny", "C": 32, "window": 8, ...},
///     "train":   {"preset": "desk", "stage1_epochs": 30, "lr1_init": 1e-3, ...},
///     "loss":    {"type": "pixel_focus_exp", "lambda": 1.1},
///     "dataset": "data/manifest.tsv",
///     "out":     "runs/tiny"
///   }
///
/// Keys match the field names of ModelConfig, TrainConfig (with the Adam
/// fields beta1/beta2/epsilon inline) and the loss structs; unknown keys are
/// rejected. "loss" configures the stage-2 loss.
struct RunConfig {
  swin::ModelConfig model;
  train::TrainConfig train;
  std::filesystem::path dataset;
  std::filesystem::path out;
};

/// Loss spec from "charbonnier", "pixel_focus_power", "pixel_focus_exp"
/// plus optional parameters, or a compact form like "pf_exp:lambda=1.1".
loss::LossSpec parse_loss_spec(std::string_view text);

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

}  // namespace evd
