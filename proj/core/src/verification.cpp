// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "evd/error.hpp"
#include "evd/losses.hpp"
#include "evd/verification.hpp"

namespace evd::verify {

namespace {

using Inputs = std::vector<Tensor>;
using Builder = std::function<Tensor(const Inputs&)>;

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo, double hi, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * unit(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

// Values with |x| in [0.2, 1] and random sign, away from the kink of abs.
Tensor signed_tensor(std::mt19937_64& rng, Shape shape) {
  Tensor t = random_tensor(rng, std::move(shape), 0.2, 1.0);
  for (auto& x : t.mutable_values()) x = (rng() & 1) != 0 ? x : -x;
  return t;
}

// Reduces f's output to a scalar with fixed random weights, so every output
// element contributes an O(1) gradient.
Builder weighted(const Builder& f, const Inputs& inputs, std::mt19937_64& rng) {
  Shape out_shape;
  {
    NoGradGuard no_grad;
    out_shape = f(inputs).shape();
  }
  const Tensor w = random_tensor(rng, out_shape, -1.0, 1.0, false);
  return [f, w](const Inputs& in) { return sum(mul(f(in), w)); };
}

CheckItem check(const std::string& name, const Builder& scalar_f, Inputs inputs, const SuiteOptions& opt,
                std::size_t max_coords = 0) {
  CheckItem item;
  item.name = name;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    const auto r = finite_diff_check([&](const Tensor&) { return scalar_f(inputs); }, inputs[i], opt.eps,
                                     max_coords, opt.seed + i);
    item.max_rel_error = std::max(item.max_rel_error, r.max_rel_error);
    item.coords += r.coords_checked;
  }
  item.passed = item.max_rel_error < opt.threshold;
  return item;
}

struct OpCase {
  Inputs inputs;
  Builder f;
};

OpCase op_case(std::string_view kind, std::mt19937_64& rng) {
  const auto R = [&](Shape s) { return random_tensor(rng, std::move(s), -1.0, 1.0); };
  if (kind == "add") return {{R({3, 4}), R({3, 4})}, [](const Inputs& x) { return add(add(x[0], x[1]), 0.5); }};
  if (kind == "sub") return {{R({3, 4}), R({3, 4})}, [](const Inputs& x) { return sub(sub(x[0], x[1]), 0.5); }};
  if (kind == "mul") return {{R({3, 4}), R({3, 4})}, [](const Inputs& x) { return mul(x[0], x[1]); }};
  if (kind == "scale") return {{R({3, 4})}, [](const Inputs& x) { return scale(x[0], -1.7); }};
  if (kind == "abs") return {{signed_tensor(rng, {3, 4})}, [](const Inputs& x) { return abs(x[0]); }};
  if (kind == "exp") return {{R({3, 4})}, [](const Inputs& x) { return exp(x[0]); }};
  if (kind == "sqrt") {
    return {{random_tensor(rng, {3, 4}, 0.5, 2.0)}, [](const Inputs& x) { return sqrt(x[0]); }};
  }
  if (kind == "power") {
    return {{random_tensor(rng, {3, 4}, 0.5, 2.0)}, [](const Inputs& x) { return power(x[0], 2.5); }};
  }
  if (kind == "gelu") return {{random_tensor(rng, {3, 4}, -3.0, 3.0)}, [](const Inputs& x) { return gelu(x[0]); }};
  if (kind == "sum") return {{R({3, 4})}, [](const Inputs& x) { return sum(x[0]); }};
  if (kind == "mean") return {{R({3, 4})}, [](const Inputs& x) { return mean(x[0]); }};
  if (kind == "matmul") {
    return {{R({2, 3, 4}), R({2, 4, 5})}, [](const Inputs& x) { return matmul(x[0], x[1]); }};
  }
  if (kind == "linear") {
    return {{R({2, 3, 4}), R({4, 5}), R({5})}, [](const Inputs& x) { return linear(x[0], x[1], x[2]); }};
  }
  if (kind == "softmax") {
    return {{random_tensor(rng, {3, 4, 5}, -2.0, 2.0)}, [](const Inputs& x) { return softmax(x[0], 1); }};
  }
  if (kind == "layer_norm") {
    return {{R({3, 6}), random_tensor(rng, {6}, 0.5, 1.5), R({6})},
            [](const Inputs& x) { return layer_norm(x[0], x[1], x[2], 1e-5); }};
  }
  if (kind == "reshape") return {{R({3, 4})}, [](const Inputs& x) { return reshape(x[0], {2, 6}); }};
  if (kind == "permute") {
    return {{R({2, 3, 4})}, [](const Inputs& x) { return permute(x[0], {2, 0, 1}); }};
  }
  if (kind == "slice") return {{R({4, 5})}, [](const Inputs& x) { return slice(x[0], 1, 1, 4); }};
  if (kind == "pad") {
    return {{R({4, 5, 2})},
            [](const Inputs& x) { return pad(x[0], {{1, 2}, {0, 3}, {0, 0}}, PadMode::Reflect); }};
  }
  if (kind == "roll") return {{R({4, 5, 2})}, [](const Inputs& x) { return roll(x[0], {-2, 3, 0}); }};
  if (kind == "concat") {
    return {{R({3, 2}), R({3, 4})}, [](const Inputs& x) { return concat_last(x[0], x[1]); }};
  }
  throw StateError("gradcheck suite has no case for op '" + std::string(kind) + "'");
}

// Trained-looking parameters: the initial weights are tiny and the biases
// zero, which would leave most gradients near the noise floor of the check.
swin::ModelParams spread_params(const swin::ModelConfig& config, std::mt19937_64& rng) {
  auto params = swin::init_params(config);
  for (auto& [key, t] : params) {
    const bool ln_scale = key.ends_with("gamma");
    for (auto& v : t.mutable_values()) v = ln_scale ? 0.8 + 0.4 * unit(rng) : v * 3.0 + 0.02 * (2.0 * unit(rng) - 1.0);
  }
  return params;
}

}  // namespace

std::vector<CheckItem> run_gradcheck_suite(const SuiteOptions& opt, const std::function<void(const CheckItem&)>& progress) {
  opt.model.validate();
  std::vector<CheckItem> items;
  const auto emit = [&](CheckItem item) {
    if (progress) progress(item);
    items.push_back(std::move(item));
  };
  std::mt19937_64 rng(opt.seed);

  for (const auto kind : differentiable_ops()) {
    auto c = op_case(kind, rng);
    emit(check("op:" + std::string(kind), weighted(c.f, c.inputs, rng), c.inputs, opt));
  }

  {
    // Differences kept in [0.15, 0.6]: away from 0 (Charbonnier curvature,
    // sign kink) and from the power-form knot at a = 0.1.
    const auto pair_inputs = [&] {
      Tensor gt = random_tensor(rng, {4, 4, 3}, 0.0, 0.3, false);
      Tensor pred = signed_tensor(rng, {4, 4, 3});
      auto pv = pred.mutable_values();
      const auto gv = gt.values();
      for (std::size_t i = 0; i < pv.size(); ++i) {
        pv[i] = gv[i] + (pv[i] > 0 ? 1.0 : -1.0) * (0.15 + 0.45 * (std::abs(pv[i]) - 0.2) / 0.8);
      }
      return Inputs{pred, gt};
    };
    const std::vector<std::pair<std::string, loss::LossSpec>> specs = {
        {"charbonnier", loss::Charbonnier{}},
        {"pixel_focus_power", loss::PixelFocusPower{}},
        {"pixel_focus_exp", loss::PixelFocusExp{1.1}},
    };
    for (const auto& [name, spec] : specs) {
      const loss::LossSpec s = spec;
      emit(check("loss:" + name, [s](const Inputs& x) { return loss::evaluate(s, x[0], x[1]); }, pair_inputs(), opt));
    }
  }

  const auto& config = opt.model;
  auto params = spread_params(config, rng);
  Tensor raw = random_tensor(rng, {opt.extent, opt.extent, 1}, 0.0, 1.0);
  const swin::ModelParams* active = &params;
  const Builder model_f = [&active, &config](const Inputs& x) { return swin::forward(x[0], *active, config); };
  const Builder model_scalar = weighted(model_f, {raw}, rng);
  emit(check("model:input", model_scalar, {raw}, opt));
  {
    // Central differences along random directions, one scalar step per probe:
    // single-coordinate probes on deep weights see gradients near 1e-7, where
    // double rounding of the forward pass alone exceeds the threshold.
    raw.set_requires_grad(false);
    CheckItem item{"model:params", 0.0, 0, false};
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& [key, base] : params) {
      for (std::size_t probe = 0; probe < opt.coords_per_param; ++probe) {
        std::vector<double> dir(base.numel());
        for (auto& d : dir) d = normal(rng);
        const Tensor u({base.numel(), 1}, std::move(dir));
        Tensor alpha({1, 1}, {0.0}, true);
        const Tensor fixed = base.detach();
        const auto f = [&, key = key](const Tensor& a) {
          auto moved = params;
          moved[key] = add(fixed, reshape(matmul(u, a), fixed.shape()));
          active = &moved;
          Tensor y = model_scalar({raw});
          active = &params;
          return y;
        };
        const auto r = finite_diff_check(f, alpha, opt.eps);
        item.max_rel_error = std::max(item.max_rel_error, r.max_rel_error);
        item.coords += r.coords_checked;
      }
    }
    item.passed = item.max_rel_error < opt.threshold;
    emit(item);
    raw.set_requires_grad(true);
  }
  {
    // Shifted windows with the region mask: 8x8 map, window 4, shift 2.
    const std::size_t C = config.C;
    // The shift is passed explicitly, so any block of the stage will do.
    const auto block = swin::block_params(params, "enc0.block" + std::to_string(config.depth - 1));
    Tensor x = random_tensor(rng, {8, 8, C}, -1.0, 1.0);
    const Builder f = [block, heads = config.heads](const Inputs& in) {
      return swin::swin_block(in[0], block, 4, 2, heads);
    };
    Inputs inputs{x, block.attn.qkv_weight};
    emit(check("model:shifted_block", weighted(f, inputs, rng), inputs, opt, 64));
  }
  return items;
}

}  // namespace evd::verify
