// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "evd/error.hpp"
#include "evd/losses.hpp"
#include "evd/swin.hpp"
#include "evd/tensor.hpp"
#include "test_util.hpp"

namespace evd {
namespace {

using test::random_tensor;

TEST(Tensor, ConstructionChecksSize) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  const Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_FALSE(t.has_grad());
}

TEST(Tensor, AddExample) {
  const Tensor a({2}, {1, 2}), b({2}, {3, 4});
  const Tensor c = add(a, b);
  EXPECT_EQ(c.values()[0], 4.0);
  EXPECT_EQ(c.values()[1], 6.0);
}

TEST(Tensor, MulByZeroIsZero) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, {3, 4}, -5, 5);
  const Tensor z = mul(x, Tensor::full({3, 4}, 0.0));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
  const Tensor zx = scale(x, 0.0);
  for (double v : zx.values()) EXPECT_EQ(std::abs(v), 0.0);
}

TEST(Tensor, ExpExample) {
  EXPECT_NEAR(exp(Tensor({1}, std::vector<double>{0.55})).item(), 1.7332530178673953, 1e-12);
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
  try {
    add(Tensor({2, 3}), Tensor({3, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
  }
}

TEST(Tensor, DomainErrors) {
  EXPECT_THROW(sqrt(Tensor({2}, {1.0, -1.0})), DomainError);
  EXPECT_THROW(power(Tensor({1}, std::vector<double>{-2.0}), 0.5), DomainError);
  EXPECT_NO_THROW(power(Tensor({1}, std::vector<double>{-2.0}), 2.0));
}

TEST(Tensor, MatmulExamples) {
  std::mt19937_64 rng(2);
  const Tensor X = random_tensor(rng, {3, 4}, -1, 1);
  Tensor I({3, 3});
  for (std::size_t i = 0; i < 3; ++i) I.mutable_values()[i * 3 + i] = 1.0;
  const Tensor Y = matmul(I, X);
  for (std::size_t i = 0; i < X.numel(); ++i) EXPECT_EQ(Y.values()[i], X.values()[i]);

  const Tensor r = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {1, 1}));
  EXPECT_EQ(r.shape(), (Shape{2, 1}));
  EXPECT_EQ(r.values()[0], 3.0);
  EXPECT_EQ(r.values()[1], 7.0);

  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
  EXPECT_THROW(matmul(Tensor({2, 2, 3}), Tensor({3, 3, 2})), ShapeError);
}

TEST(Tensor, MatmulAgainstNaiveProduct) {
  std::mt19937_64 rng(3);
  const Tensor a = random_tensor(rng, {2, 4, 5}, -1, 1), b = random_tensor(rng, {2, 5, 3}, -1, 1);
  const Tensor c = matmul(a, b);
  for (std::size_t bt = 0; bt < 2; ++bt) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double acc = 0;
        for (std::size_t k = 0; k < 5; ++k) acc += a.values()[bt * 20 + i * 5 + k] * b.values()[bt * 15 + k * 3 + j];
        EXPECT_NEAR(c.values()[bt * 12 + i * 3 + j], acc, 1e-14);
      }
    }
  }
}

TEST(Tensor, MatmulGradientCheck) {
  std::mt19937_64 rng(4);
  Tensor a = random_tensor(rng, {4, 5}, -1, 1, true);
  Tensor b = random_tensor(rng, {5, 3}, -1, 1, true);
  const Tensor w = random_tensor(rng, {4, 3}, -1, 1);
  EXPECT_LT(finite_diff_check([&](const Tensor&) { return sum(mul(matmul(a, b), w)); }, a, 1e-5).max_rel_error, 1e-6);
  EXPECT_LT(finite_diff_check([&](const Tensor&) { return sum(mul(matmul(a, b), w)); }, b, 1e-5).max_rel_error, 1e-6);
}

TEST(Tensor, SoftmaxExamples) {
  const Tensor u = softmax(Tensor({3}, {0, 0, 0}), 0);
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor big = softmax(Tensor({2}, {1000, 0}), 0);
  EXPECT_TRUE(std::isfinite(big.values()[0]));
  EXPECT_NEAR(big.values()[0], 1.0, 1e-15);
  EXPECT_NEAR(big.values()[1], 0.0, 1e-15);
  EXPECT_THROW(softmax(Tensor({2, 3}), 2), ShapeError);
}

TEST(Tensor, SoftmaxSumsToOneAlongAxis) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor(rng, {3, 4, 5}, -4, 4);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const Tensor y = softmax(x, axis);
    const auto& s = x.shape();
    for (std::size_t i = 0; i < s[0]; ++i) {
      for (std::size_t j = 0; j < s[1]; ++j) {
        for (std::size_t k = 0; k < s[2]; ++k) {
          std::size_t idx[3] = {i, j, k};
          if (idx[axis] != 0) continue;
          double total = 0;
          for (std::size_t t = 0; t < s[axis]; ++t) {
            idx[axis] = t;
            const double v = y.values()[(idx[0] * s[1] + idx[1]) * s[2] + idx[2]];
            EXPECT_GE(v, 0.0);
            total += v;
          }
          EXPECT_NEAR(total, 1.0, 1e-12);
        }
      }
    }
  }
}

TEST(Tensor, SoftmaxGradientCheck) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor(rng, {2, 4}, -2, 2, true);
  const Tensor w = random_tensor(rng, {2, 4}, -1, 1);
  EXPECT_LT(finite_diff_check([&](const Tensor& t) { return sum(mul(softmax(t, 1), w)); }, x, 1e-5).max_rel_error,
            1e-6);
}

TEST(Tensor, LayerNormExamples) {
  const Tensor c = Tensor::full({2, 4}, 3.0);
  const Tensor ones = Tensor::full({4}, 1.0), zeros = Tensor::full({4}, 0.0);
  const Tensor flat = layer_norm(c, ones, zeros, 1e-5);
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(7);
  const Tensor x = random_tensor(rng, {2, 4}, -1, 1);
  const Tensor shifted = layer_norm(x, zeros, Tensor::full({4}, 5.0), 1e-5);
  for (double v : shifted.values()) EXPECT_EQ(v, 5.0);
  EXPECT_THROW(layer_norm(x, ones, zeros, 0.0), ParameterError);
  EXPECT_THROW(layer_norm(x, Tensor::full({3}, 1.0), zeros, 1e-5), ShapeError);
}

TEST(Tensor, LayerNormNormalizes) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor(rng, {3, 16}, -3, 3);
  const Tensor y = layer_norm(x, Tensor::full({16}, 1.0), Tensor::full({16}, 0.0), 1e-12);
  for (std::size_t r = 0; r < 3; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 16; ++c) m += y.values()[r * 16 + c];
    m /= 16;
    for (std::size_t c = 0; c < 16; ++c) v += std::pow(y.values()[r * 16 + c] - m, 2);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 16, 1.0, 1e-9);
  }
}

TEST(Tensor, LayerNormGradientCheck) {
  std::mt19937_64 rng(9);
  Tensor x = random_tensor(rng, {2, 3, 4}, -1, 1, true);
  Tensor g = random_tensor(rng, {4}, 0.5, 1.5, true);
  Tensor b = random_tensor(rng, {4}, -1, 1, true);
  const Tensor w = random_tensor(rng, {2, 3, 4}, -1, 1);
  const auto f = [&](const Tensor&) { return sum(mul(layer_norm(x, g, b, 1e-5), w)); };
  EXPECT_LT(finite_diff_check(f, x, 1e-5).max_rel_error, 1e-5);
  EXPECT_LT(finite_diff_check(f, g, 1e-5).max_rel_error, 1e-5);
  EXPECT_LT(finite_diff_check(f, b, 1e-5).max_rel_error, 1e-5);
}

TEST(Tensor, Conv1x1Examples) {
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor(rng, {3, 4, 5}, -1, 1);
  Tensor I({5, 5});
  for (std::size_t i = 0; i < 5; ++i) I.mutable_values()[i * 5 + i] = 1.0;
  const Tensor y = conv1x1(x, I, Tensor::full({5}, 0.0));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.values()[i], x.values()[i]);

  // 1x1 spatial: plain matrix-vector product.
  const Tensor v = random_tensor(rng, {1, 1, 3}, -1, 1);
  const Tensor W = random_tensor(rng, {3, 2}, -1, 1);
  const Tensor mv = conv1x1(v, W, Tensor());
  for (std::size_t j = 0; j < 2; ++j) {
    double acc = 0;
    for (std::size_t k = 0; k < 3; ++k) acc += v.values()[k] * W.values()[k * 2 + j];
    EXPECT_NEAR(mv.values()[j], acc, 1e-15);
  }
  EXPECT_THROW(conv1x1(x, random_tensor(rng, {4, 2}, -1, 1), Tensor()), ShapeError);
}

TEST(Tensor, Conv1x1EqualsMatmulOnReshapedInput) {
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor(rng, {4, 6, 5}, -1, 1);
  const Tensor W = random_tensor(rng, {5, 7}, -1, 1);
  const Tensor bias = random_tensor(rng, {7}, -1, 1);
  const Tensor conv = conv1x1(x, W, bias);
  const Tensor mm = matmul(reshape(x, {24, 5}), W);
  for (std::size_t p = 0; p < 24; ++p) {
    for (std::size_t j = 0; j < 7; ++j) {
      EXPECT_NEAR(conv.values()[p * 7 + j], mm.values()[p * 7 + j] + bias.values()[j], 1e-12);
    }
  }
}

TEST(Tensor, RollIdentities) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor(rng, {5, 7, 2}, -1, 1);
  const auto same = [&](const Tensor& y) {
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(y.values()[i], x.values()[i]);
  };
  same(roll(x, {0, 0, 0}));
  same(roll(x, {5, 7, 0}));
  same(roll(x, {-10, 14, 2}));
  same(roll(roll(x, {3, -2, 1}), {-3, 2, -1}));
  // out[i] = x[i - offset]
  const Tensor r = roll(Tensor({4}, {1, 2, 3, 4}), {1});
  EXPECT_EQ(r.values()[0], 4.0);
  EXPECT_EQ(r.values()[1], 1.0);
}

TEST(Tensor, ReshapePermuteRoundTrips) {
  std::mt19937_64 rng(13);
  const Tensor x = random_tensor(rng, {2, 3, 4}, -1, 1);
  const Tensor back = reshape(reshape(x, {6, 4}), {2, 3, 4});
  const Tensor p = permute(permute(x, {2, 0, 1}), {1, 2, 0});
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(back.values()[i], x.values()[i]);
    EXPECT_EQ(p.values()[i], x.values()[i]);
  }
  EXPECT_THROW(reshape(x, {5, 5}), ShapeError);
  EXPECT_THROW(permute(x, {0, 0, 1}), ShapeError);
}

TEST(Tensor, SliceAndPad) {
  const Tensor x({2, 4}, {0, 1, 2, 3, 4, 5, 6, 7});
  const Tensor s = slice(x, 1, 1, 3);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_EQ(s.values()[0], 1.0);
  EXPECT_EQ(s.values()[3], 6.0);
  EXPECT_THROW(slice(x, 1, 2, 5), ShapeError);
  EXPECT_THROW(slice(x, 2, 0, 1), ShapeError);

  const Tensor row({4}, {1, 2, 3, 4});
  const Tensor z = pad(row, {{1, 2}}, PadMode::Zero);
  EXPECT_EQ(z.shape(), (Shape{7}));
  EXPECT_EQ(z.values()[0], 0.0);
  EXPECT_EQ(z.values()[1], 1.0);
  EXPECT_EQ(z.values()[6], 0.0);
  const Tensor r = pad(row, {{2, 2}}, PadMode::Reflect);
  const double expect[] = {3, 2, 1, 2, 3, 4, 3, 2};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(r.values()[i], expect[i]);
  // Widths beyond the extent keep mirroring.
  const Tensor wide = pad(Tensor({2}, {1, 2}), {{0, 5}}, PadMode::Reflect);
  const double wexpect[] = {1, 2, 1, 2, 1, 2, 1};
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(wide.values()[i], wexpect[i]);
}

TEST(Tensor, ConcatLast) {
  const Tensor a({2, 1}, {1, 2}), b({2, 2}, {3, 4, 5, 6});
  const Tensor c = concat_last(a, b);
  const double expect[] = {1, 3, 4, 2, 5, 6};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(c.values()[i], expect[i]);
  EXPECT_THROW(concat_last(Tensor({2, 1}), Tensor({3, 1})), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  for (const Shape& s : {Shape{1}, Shape{3}, Shape{2, 5}, Shape{2, 3, 4}}) {
    Tensor x = Tensor::full(s, 0.7, true);
    backward(sum(x));
    ASSERT_TRUE(x.has_grad());
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  }
}

TEST(Backward, QuadraticGivesTwoX) {
  std::mt19937_64 rng(14);
  Tensor x = random_tensor(rng, {4, 3}, -2, 2, true);
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x.grad()[i], 2.0 * x.values()[i]);
}

TEST(Backward, ComposedChainMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  Tensor x = random_tensor(rng, {3, 4}, 0.2, 1.5, true);
  const auto f = [](const Tensor& t) { return mean(exp(sqrt(scale(t, 0.5)))); };
  EXPECT_LT(finite_diff_check(f, x, 1e-5).max_rel_error, 1e-5);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Tensor x({2}, {1.5, -0.5}, true);
  const Tensor y = add(x, x);
  backward(sum(mul(y, x)));  // 2 x^2 -> 4x
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -2.0);
}

TEST(Backward, Errors) {
  Tensor x({3}, {1, 2, 3}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ShapeError);
  const Tensor loss = sum(x);
  backward(loss);
  EXPECT_THROW(backward(loss), StateError);
  Tensor y({2}, {1, 2});
  EXPECT_THROW(backward(sum(y)), StateError);  // nothing requires grad
}

TEST(Backward, NoGradGuardSkipsRecording) {
  Tensor x({2}, {1, 2}, true);
  {
    NoGradGuard g;
    EXPECT_FALSE(grad_enabled());
    const Tensor y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.is_leaf());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(mul(x, x).is_leaf());
}

TEST(Backward, OpResultsAreImmutable) {
  Tensor x({2}, {1, 2}, true);
  Tensor y = add(x, 1.0);
  EXPECT_THROW(y.mutable_values(), StateError);
  EXPECT_NO_THROW(x.mutable_values());
}

TEST(Backward, FiniteChecksNameTheOp) {
  const bool previous = finite_checks();
  set_finite_checks(true);
  try {
    exp(Tensor({1}, std::vector<double>{1000.0}));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
  set_finite_checks(previous);
}

TEST(GradCheck, SumIsExact) {
  std::mt19937_64 rng(16);
  Tensor x = random_tensor(rng, {5, 2}, -3, 3, true);
  EXPECT_LT(finite_diff_check([](const Tensor& t) { return sum(t); }, x, 1e-5).max_rel_error, 1e-10);
}

TEST(GradCheck, CharbonnierAgainstFixedTarget) {
  std::mt19937_64 rng(17);
  Tensor x = random_tensor(rng, {4, 4, 3}, 0.0, 1.0, true);
  const Tensor target = random_tensor(rng, {4, 4, 3}, 0.0, 1.0);
  const auto r = finite_diff_check([&](const Tensor& t) { return loss::charbonnier(t, target, 1e-3); }, x, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-5);
  EXPECT_EQ(r.coords_checked, 48u);
}

TEST(GradCheck, TinyModelWithLossOnEightByEight) {
  const auto config = swin::preset(swin::Preset::Tiny);
  const auto params = swin::init_params(config);
  std::mt19937_64 rng(18);
  Tensor raw = random_tensor(rng, {8, 8, 1}, 0.0, 1.0, true);
  const Tensor target = random_tensor(rng, {8, 8, 3}, 2.0, 3.0);  // far from the output: smooth loss region
  const auto f = [&](const Tensor& t) { return loss::charbonnier(swin::reconstruct(t, params, config), target, 1e-3); };
  // Gradients here are ~1e-7 against a loss near 2.5; a wider step keeps
  // rounding out of the difference quotient.
  EXPECT_LT(finite_diff_check(f, raw, 1e-3).max_rel_error, 1e-4);
}

TEST(GradCheck, Errors) {
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(finite_diff_check([](const Tensor& t) { return scale(t, 1.0); }, x, 1e-5), ShapeError);
  Tensor nograd({2}, {1, 2});
  EXPECT_THROW(finite_diff_check([](const Tensor& t) { return sum(t); }, nograd, 1e-5), StateError);
  EXPECT_THROW(finite_diff_check([](const Tensor& t) { return sum(t); }, x, 0.0), ParameterError);
}

TEST(GradCheck, SampledCoordinates) {
  std::mt19937_64 rng(19);
  Tensor x = random_tensor(rng, {10, 10}, -1, 1, true);
  const auto r = finite_diff_check([](const Tensor& t) { return sum(mul(t, t)); }, x, 1e-5, 7, 3);
  EXPECT_EQ(r.coords_checked, 7u);
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(Registry, NamesAreUniqueAndCoverRecordedOps) {
  const auto ops = differentiable_ops();
  const std::set<std::string_view> names(ops.begin(), ops.end());
  EXPECT_EQ(names.size(), ops.size());
  // Every op kind produced by the model forward pass is registered.
  const auto config = swin::preset(swin::Preset::Tiny);
  const auto params = swin::init_params(config);
  std::mt19937_64 rng(20);
  const Tensor raw = random_tensor(rng, {16, 16, 1}, 0, 1, true);
  const Tensor out = swin::forward(raw, params, config);
  EXPECT_TRUE(names.contains(out.op_kind())) << out.op_kind();
  for (auto k : {"add", "mul", "matmul", "linear", "softmax", "layer_norm", "gelu", "roll", "permute", "reshape",
                 "concat", "pad", "slice"}) {
    EXPECT_TRUE(names.contains(k)) << k;
  }
}

TEST(Dump, RoundTrip) {
  std::mt19937_64 rng(21);
  const Tensor x = random_tensor(rng, {2, 3, 2}, -1e3, 1e3);
  std::stringstream ss;
  write_dump(ss, x);
  const Tensor y = read_dump(ss);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.values()[i], x.values()[i]);
  std::stringstream bad("2 2\n1 2 3\n");
  EXPECT_THROW(read_dump(bad), DataError);
}

}  // namespace
}  // namespace evd
