// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include <gtest/gtest.h>

#include "evd/verification.hpp"

namespace evd {
namespace {

verify::SuiteOptions mini_options() {
  verify::SuiteOptions opt;
  opt.model.C = 8;
  opt.model.stages = 2;
  opt.model.depth = 1;
  opt.model.window = 4;
  opt.model.heads = 2;
  opt.model.mlp_ratio = 2;
  return opt;
}

TEST(GradcheckSuite, CoversEveryOpOnce) {
  std::size_t streamed = 0;
  const auto items = verify::run_gradcheck_suite(mini_options(), [&](const verify::CheckItem&) { ++streamed; });
  EXPECT_EQ(streamed, items.size());
  std::set<std::string> names;
  for (const auto& it : items) {
    EXPECT_TRUE(names.insert(it.name).second) << "duplicate " << it.name;
    EXPECT_GT(it.coords, 0u) << it.name;
    EXPECT_TRUE(it.passed) << it.name << " " << it.max_rel_error;
  }
  for (const auto kind : differentiable_ops()) EXPECT_TRUE(names.count("op:" + std::string(kind))) << kind;
  for (const char* n :
       {"loss:charbonnier", "loss:pixel_focus_power", "loss:pixel_focus_exp", "model:input", "model:params"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
}

TEST(GradcheckSuite, ThresholdDecidesPass) {
  auto opt = mini_options();
  opt.threshold = 1e-14;
  const auto items = verify::run_gradcheck_suite(opt);
  std::size_t failed = 0;
  for (const auto& it : items) failed += it.passed ? 0 : 1;
  EXPECT_GT(failed, 0u);
}

}  // namespace
}  // namespace evd
