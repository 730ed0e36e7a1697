// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evd/swin.hpp"

namespace evd::verify {

struct SuiteOptions {
  double eps = 1e-5;
  double threshold = 1e-4;
  std::uint64_t seed = 0;
  swin::ModelConfig model = swin::preset(swin::Preset::Tiny);
  std::size_t extent = 16;          // model input is extent x extent
  std::size_t coords_per_param = 3;  // sampled coordinates per parameter tensor
};

struct CheckItem {
  std::string name;   // "op:<kind>", "loss:<name>", "model:<part>"
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  bool passed = false;
};

/// Central-difference check of every registered differentiable op (one item
/// each, in registry order), the three losses and the full model: gradient
/// with respect to the RAW input, a sample of every parameter tensor, and a
/// shifted-window block.
std::vector<CheckItem> run_gradcheck_suite(const SuiteOptions& options,
                                           const std::function<void(const CheckItem&)>& progress = {});

}  // namespace evd::verify
