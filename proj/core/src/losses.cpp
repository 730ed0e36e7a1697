// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "evd/error.hpp"
#include "evd/losses.hpp"
#include "tensor_internal.hpp"

namespace evd::loss {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Mean over elements of value(|pred - gt|); the vjp uses derivative() times
// the sign of the difference (zero at zero).
Tensor reduce_loss(std::string_view kind, const LossSpec& spec, const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError(std::string(kind) + ": shape mismatch " + shape_string(pred.shape()) + " vs " +
                     shape_string(gt.shape()));
  }
  const auto p = pred.values(), t = gt.values();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += value(spec, std::abs(p[i] - t[i]));
  return detail::make_result(
      kind, Shape{1}, {total / n}, {pred, gt},
      [spec, pred, gt, n](std::span<const double> g, const detail::GradSlots& gin) {
        const auto p = pred.values(), t = gt.values();
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double r = p[i] - t[i];
          double dr;
          if (const auto* c = std::get_if<Charbonnier>(&spec)) {
            dr = r / std::sqrt(r * r + c->eps * c->eps);
          } else {
            const double sgn = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
            dr = sgn == 0.0 ? 0.0 : sgn * derivative(spec, std::abs(r));
          }
          const double gi = g[0] * dr / n;
          if (!gin[0].empty()) gin[0][i] += gi;
          if (!gin[1].empty()) gin[1][i] -= gi;
        }
      });
}

}  // namespace

void validate(const LossSpec& spec, double lambda_cap) {
  std::visit(overloaded{
                 [](const Charbonnier& c) {
                   if (!(c.eps > 0.0)) throw ParameterError("charbonnier eps must be > 0");
                 },
                 [](const PixelFocusPower& p) {
                   if (!(p.a > 0.0 && p.a < 1.0)) throw ParameterError("pixel-focus a must lie in (0,1)");
                   if (!(p.b > 0.0 && p.b < 1.0)) throw ParameterError("pixel-focus b must lie in (0,1)");
                   if (!(p.g > 0.0)) throw ParameterError("pixel-focus g must be > 0");
                 },
                 [lambda_cap](const PixelFocusExp& e) {
                   if (!(e.lambda > 0.0)) throw ParameterError("pixel-focus lambda must be > 0");
                   if (e.lambda > lambda_cap) {
                     throw ParameterError("pixel-focus lambda " + fmt(e.lambda) + " exceeds the cap " +
                                          fmt(lambda_cap) + " (large lambda destabilizes training)");
                   }
                 },
             },
             spec);
}

std::string describe(const LossSpec& spec) {
  return std::visit(overloaded{
                        [](const Charbonnier& c) { return "charbonnier(eps=" + fmt(c.eps) + ")"; },
                        [](const PixelFocusPower& p) {
                          return "pf_power(a=" + fmt(p.a) + ";b=" + fmt(p.b) + ";g=" + fmt(p.g) + ")";
                        },
                        [](const PixelFocusExp& e) { return "pf_exp(lambda=" + fmt(e.lambda) + ")"; },
                    },
                    spec);
}

double value(const LossSpec& spec, double d) {
  return std::visit(overloaded{
                        [d](const Charbonnier& c) { return std::sqrt(d * d + c.eps * c.eps); },
                        [d](const PixelFocusPower& p) {
                          if (d < p.a) return std::pow(d / p.a, p.g) * p.b;
                          return (d - 1.0) * (1.0 - p.b) / (1.0 - p.a) + 1.0;
                        },
                        [d](const PixelFocusExp& e) { return std::expm1(e.lambda * d) - e.lambda * d; },
                    },
                    spec);
}

double derivative(const LossSpec& spec, double d) {
  return std::visit(overloaded{
                        [d](const Charbonnier& c) { return d / std::sqrt(d * d + c.eps * c.eps); },
                        [d](const PixelFocusPower& p) {
                          if (d >= p.a) return (1.0 - p.b) / (1.0 - p.a);
                          if (d == 0.0) return p.g == 1.0 ? p.b / p.a : 0.0;
                          return p.g * p.b * std::pow(d, p.g - 1.0) / std::pow(p.a, p.g);
                        },
                        [d](const PixelFocusExp& e) { return e.lambda * std::expm1(e.lambda * d); },
                    },
                    spec);
}

Tensor charbonnier(const Tensor& pred, const Tensor& gt, double eps) {
  const LossSpec spec = Charbonnier{eps};
  validate(spec);
  return reduce_loss("charbonnier", spec, pred, gt);
}

Tensor pixel_focus_power(const Tensor& pred, const Tensor& gt, double a, double b, double g) {
  const LossSpec spec = PixelFocusPower{a, b, g};
  validate(spec);
  return reduce_loss("pixel_focus_power", spec, pred, gt);
}

Tensor pixel_focus_exp(const Tensor& pred, const Tensor& gt, double lambda, double lambda_cap) {
  const LossSpec spec = PixelFocusExp{lambda};
  validate(spec, lambda_cap);
  return reduce_loss("pixel_focus_exp", spec, pred, gt);
}

Tensor evaluate(const LossSpec& spec, const Tensor& pred, const Tensor& gt) {
  return std::visit(overloaded{
                        [&](const Charbonnier& c) { return charbonnier(pred, gt, c.eps); },
                        [&](const PixelFocusPower& p) { return pixel_focus_power(pred, gt, p.a, p.b, p.g); },
                        [&](const PixelFocusExp& e) { return pixel_focus_exp(pred, gt, e.lambda); },
                    },
                    spec);
}

DifferenceHistogram histogram(std::span<const double> values, std::size_t bins) {
  if (bins < 2) throw ParameterError("histogram needs at least 2 bins");
  DifferenceHistogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    const double scaled = std::clamp(v, 0.0, 1.0) * static_cast<double>(bins);
    const auto bin = std::min(static_cast<std::size_t>(scaled), bins - 1);
    ++h.counts[bin];
  }
  h.total = values.size();
  return h;
}

DifferenceAnalysis difference_histogram(const RgbImage& pred, const RgbImage& gt, std::size_t bins) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw ShapeError("difference_histogram: " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                     " vs " + std::to_string(gt.width) + "x" + std::to_string(gt.height));
  }
  std::vector<double> diffs(pred.data.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) diffs[i] = std::abs(pred.data[i] - gt.data[i]);
  DifferenceAnalysis out;
  out.histogram = histogram(diffs, bins);
  out.width = pred.width;
  out.height = pred.height;
  out.map.resize(pred.width * pred.height);
  for (std::size_t p = 0; p < out.map.size(); ++p) {
    out.map[p] = std::max({diffs[3 * p], diffs[3 * p + 1], diffs[3 * p + 2]});
  }
  return out;
}

std::vector<CurveSample> loss_curve_samples(const LossSpec& spec, std::size_t n, double lo, double hi) {
  if (n < 2) throw ParameterError("loss_curve_samples needs n >= 2");
  validate(spec);
  std::vector<CurveSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = {d, value(spec, d), derivative(spec, d)};
  }
  return out;
}

}  // namespace evd::loss
