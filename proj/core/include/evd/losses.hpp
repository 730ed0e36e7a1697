// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "evd/image.hpp"
#include "evd/tensor.hpp"

namespace evd::loss {

struct Charbonnier {
  double eps = 1e-3;
};

/// (d/a)^g * b below the threshold a, linear from (a, b) to (1, 1) above it.
struct PixelFocusPower {
  double a = 0.1;
  double b = 0.05;
  double g = 2.0;
};

/// e^(lambda d) - lambda d - 1.
struct PixelFocusExp {
  double lambda = 1.1;
};

using LossSpec = std::variant<Charbonnier, PixelFocusPower, PixelFocusExp>;

/// Values of lambda above this are rejected unless the caller raises the cap.
inline constexpr double kDefaultLambdaCap = 1.5;

/// Throws ParameterError when a hyperparameter is out of range.
void validate(const LossSpec& spec, double lambda_cap = kDefaultLambdaCap);

/// Short identifier used in CSVs and logs, e.g. "pf_exp(lambda=1.1)".
std::string describe(const LossSpec& spec);

/// Per-element loss as a function of the absolute difference d, and its
/// derivative in d. The power form uses the right branch at d = a.
double value(const LossSpec& spec, double d);
double derivative(const LossSpec& spec, double d);

// Mean-reduced losses over every element, with analytic vjps.
Tensor charbonnier(const Tensor& pred, const Tensor& gt, double eps);
Tensor pixel_focus_power(const Tensor& pred, const Tensor& gt, double a, double b, double g);
Tensor pixel_focus_exp(const Tensor& pred, const Tensor& gt, double lambda,
                       double lambda_cap = kDefaultLambdaCap);
Tensor evaluate(const LossSpec& spec, const Tensor& pred, const Tensor& gt);

struct DifferenceHistogram {
  std::vector<double> edges;  // bins + 1 values, edges[0] = 0, edges.back() = 1
  std::vector<std::size_t> counts;
  std::size_t total = 0;
};

/// Equal-width bins over [0,1]; values >= 1 land in the last bin.
DifferenceHistogram histogram(std::span<const double> values, std::size_t bins);

struct DifferenceAnalysis {
  DifferenceHistogram histogram;     // over every pixel-channel |pred - gt|
  std::vector<double> map;           // height x width, max over channels
  std::size_t width = 0, height = 0;
};

DifferenceAnalysis difference_histogram(const RgbImage& pred, const RgbImage& gt, std::size_t bins);

struct CurveSample {
  double d, value, gradient;
};

/// n samples of the loss and its derivative at d = i/(n-1) over [lo, hi].
std::vector<CurveSample> loss_curve_samples(const LossSpec& spec, std::size_t n, double lo = 0.0,
                                            double hi = 1.0);

}  // namespace evd::loss
