// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "evd/error.hpp"
#include "evd/tensor.hpp"

namespace evd {

GradCheckResult finite_diff_check(const ScalarFn& f, Tensor& x, double eps, std::size_t max_coords,
                                  unsigned long long seed) {
  if (!(eps > 0.0)) throw ParameterError("finite_diff_check eps must be > 0");
  if (!x.is_leaf() || !x.requires_grad()) {
    throw StateError("finite_diff_check needs a leaf tensor with requires_grad");
  }
  x.zero_grad();
  const Tensor y = f(x);
  if (y.numel() != 1) {
    throw ShapeError("finite_diff_check: f must be scalar-valued, got shape " + shape_string(y.shape()));
  }
  backward(y);
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
  x.zero_grad();

  std::vector<std::size_t> coords(x.numel());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coords != 0 && max_coords < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  auto values = x.mutable_values();
  for (auto i : coords) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double plus = f(x).item();
    values[i] = saved - eps;
    const double minus = f(x).item();
    values[i] = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
    }
    ++result.coords_checked;
  }
  return result;
}

}  // namespace evd
