// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "evd/error.hpp"
#include "evd/tensor.hpp"
#include "tensor_internal.hpp"

namespace evd {

using detail::GradSlots;
using detail::make_result;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Index = Eigen::Index;

CMapMat cmat(std::span<const double> s, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return CMapMat(s.data() + offset, static_cast<Index>(rows), static_cast<Index>(cols));
}
MapMat mmat(std::span<double> s, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return MapMat(s.data() + offset, static_cast<Index>(rows), static_cast<Index>(cols));
}
MapMat mmat(std::vector<double>& s, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return MapMat(s.data() + offset, static_cast<Index>(rows), static_cast<Index>(cols));
}

// Eigen peels its vectorized loops by buffer address, which changes the
// summation order. Working on owned (aligned) copies makes results depend
// on shapes only, so identical runs stay bit-identical.
RowMat own(std::span<const double> s, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return cmat(s, rows, cols, offset);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <class F>
std::vector<double> map_values(std::span<const double> in, F f) {
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

constexpr std::array<std::string_view, 21> kDifferentiableOps = {
    "add",    "sub",     "mul",        "scale",  "abs",     "exp",   "sqrt",
    "power",  "gelu",    "sum",        "mean",   "matmul",  "linear", "softmax",
    "layer_norm", "reshape", "permute", "slice", "pad",     "roll",  "concat",
};

}  // namespace

std::span<const std::string_view> differentiable_ops() { return kDifferentiableOps; }

// -- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a, b},
                     [](std::span<const double> g, const GradSlots& gin) {
                       for (const auto& dst : gin) {
                         for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
                       }
                     });
}

Tensor add(const Tensor& a, double b) {
  return make_result("add", a.shape(), map_values(a.values(), [b](double v) { return v + b; }), {a},
                     [](std::span<const double> g, const GradSlots& gin) {
                       for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i];
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a, b},
                     [](std::span<const double> g, const GradSlots& gin) {
                       for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i];
                       for (std::size_t i = 0; i < gin[1].size(); ++i) gin[1][i] -= g[i];
                     });
}

Tensor sub(const Tensor& a, double b) { return add(a, -b); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a, b},
                     [a, b](std::span<const double> g, const GradSlots& gin) {
                       const auto x = a.values(), y = b.values();
                       for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i] * y[i];
                       for (std::size_t i = 0; i < gin[1].size(); ++i) gin[1][i] += g[i] * x[i];
                     });
}

Tensor scale(const Tensor& a, double factor) {
  return make_result("scale", a.shape(),
                     map_values(a.values(), [factor](double v) { return v * factor; }), {a},
                     [factor](std::span<const double> g, const GradSlots& gin) {
                       for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i] * factor;
                     });
}

Tensor abs(const Tensor& a) {
  return make_result("abs", a.shape(), map_values(a.values(), [](double v) { return std::abs(v); }),
                     {a}, [a](std::span<const double> g, const GradSlots& gin) {
                       const auto x = a.values();
                       for (std::size_t i = 0; i < gin[0].size(); ++i) {
                         const double s = x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0);
                         gin[0][i] += g[i] * s;
                       }
                     });
}

Tensor exp(const Tensor& a) {
  auto out = map_values(a.values(), [](double v) { return std::exp(v); });
  auto saved = std::make_shared<std::vector<double>>(out);
  return make_result("exp", a.shape(), std::move(out), {a},
                     [saved](std::span<const double> g, const GradSlots& gin) {
                       for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i] * (*saved)[i];
                     });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.values()) {
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  }
  auto out = map_values(a.values(), [](double v) { return std::sqrt(v); });
  auto saved = std::make_shared<std::vector<double>>(out);
  return make_result("sqrt", a.shape(), std::move(out), {a},
                     [saved](std::span<const double> g, const GradSlots& gin) {
                       for (std::size_t i = 0; i < gin[0].size(); ++i) {
                         gin[0][i] += g[i] * 0.5 / (*saved)[i];
                       }
                     });
}

Tensor power(const Tensor& a, double exponent) {
  const bool integral = std::floor(exponent) == exponent;
  for (double v : a.values()) {
    if (v < 0.0 && !integral) {
      throw DomainError("power: negative base " + std::to_string(v) + " with non-integer exponent");
    }
    if (v == 0.0 && exponent < 0.0) throw DomainError("power: zero base with negative exponent");
  }
  return make_result("power", a.shape(),
                     map_values(a.values(), [exponent](double v) { return std::pow(v, exponent); }),
                     {a}, [a, exponent](std::span<const double> g, const GradSlots& gin) {
                       const auto x = a.values();
                       for (std::size_t i = 0; i < gin[0].size(); ++i) {
                         gin[0][i] += g[i] * exponent * std::pow(x[i], exponent - 1.0);
                       }
                     });
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  return make_result(
      "gelu", a.shape(),
      map_values(a.values(), [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); }), {a},
      [a](std::span<const double> g, const GradSlots& gin) {
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        const auto x = a.values();
        for (std::size_t i = 0; i < gin[0].size(); ++i) {
          const double cdf = 0.5 * (1.0 + std::erf(x[i] * inv_sqrt2));
          const double pdf = inv_sqrt2pi * std::exp(-0.5 * x[i] * x[i]);
          gin[0][i] += g[i] * (cdf + x[i] * pdf);
        }
      });
}

// -- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result("sum", Shape{1}, {s}, {a}, [](std::span<const double> g, const GradSlots& gin) {
    for (auto& d : gin[0]) d += g[0];
  });
}

Tensor mean(const Tensor& a) {
  const auto n = static_cast<double>(a.numel());
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result("mean", Shape{1}, {s / n}, {a},
                     [n](std::span<const double> g, const GradSlots& gin) {
                       for (auto& d : gin[0]) d += g[0] / n;
                     });
}

// -- linear algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool batched = sa.size() == 3;
  if (!((sa.size() == 2 && sb.size() == 2) || (sa.size() == 3 && sb.size() == 3))) {
    throw ShapeError("matmul expects two rank-2 or two rank-3 tensors, got " + shape_string(sa) +
                     " and " + shape_string(sb));
  }
  const std::size_t batch = batched ? sa[0] : 1;
  if (batched && sb[0] != batch) {
    throw ShapeError("matmul batch mismatch " + shape_string(sa) + " vs " + shape_string(sb));
  }
  const std::size_t m = sa[sa.size() - 2], k = sa.back(), k2 = sb[sb.size() - 2], n = sb.back();
  if (k != k2) {
    throw ShapeError("matmul inner extent mismatch " + shape_string(sa) + " vs " + shape_string(sb));
  }
  std::vector<double> out(batch * m * n);
  const auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < batch; ++i) {
    const RowMat r = own(x, m, k, i * m * k) * own(y, k, n, i * k * n);
    mmat(out, m, n, i * m * n) = r;
  }
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  return make_result("matmul", std::move(shape), std::move(out), {a, b},
                     [a, b, batch, m, k, n](std::span<const double> g, const GradSlots& gin) {
                       const auto x = a.values(), y = b.values();
                       for (std::size_t i = 0; i < batch; ++i) {
                         const RowMat dc = own(g, m, n, i * m * n);
                         if (!gin[0].empty()) {
                           const RowMat r = dc * own(y, k, n, i * k * n).transpose();
                           mmat(gin[0], m, k, i * m * k) += r;
                         }
                         if (!gin[1].empty()) {
                           const RowMat r = own(x, m, k, i * m * k).transpose() * dc;
                           mmat(gin[1], k, n, i * k * n) += r;
                         }
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const auto& sx = x.shape();
  const auto& sw = weight.shape();
  if (sx.empty() || sw.size() != 2 || sx.back() != sw[0]) {
    throw ShapeError("linear: input " + shape_string(sx) + " incompatible with weight " +
                     shape_string(sw));
  }
  const std::size_t k = sw[0], n = sw[1], rows = x.numel() / k;
  if (bias.defined() && bias.shape() != Shape{n}) {
    throw ShapeError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                     shape_string(sw));
  }
  std::vector<double> out(rows * n);
  auto y = mmat(out, rows, n);
  {
    const RowMat r = own(x.values(), rows, k) * own(weight.values(), k, n);
    y = r;
  }
  if (bias.defined()) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), static_cast<Index>(n));
  }
  Shape shape = sx;
  shape.back() = n;
  return make_result("linear", std::move(shape), std::move(out), {x, weight, bias},
                     [x, weight, rows, k, n](std::span<const double> g, const GradSlots& gin) {
                       const RowMat dy = own(g, rows, n);
                       if (!gin[0].empty()) {
                         const RowMat r = dy * own(weight.values(), k, n).transpose();
                         mmat(gin[0], rows, k) += r;
                       }
                       if (!gin[1].empty()) {
                         const RowMat r = own(x.values(), rows, k).transpose() * dy;
                         mmat(gin[1], k, n) += r;
                       }
                       if (gin.size() > 2 && !gin[2].empty()) {
                         const RowMat r = dy.colwise().sum();
                         mmat(gin[2], 1, n) += r;
                       }
                     });
}

Tensor conv1x1(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3) throw ShapeError("conv1x1 expects H x W x C input, got " + shape_string(x.shape()));
  if (weight.rank() != 2 || weight.dim(0) != x.dim(2)) {
    throw ShapeError("conv1x1: input channels " + std::to_string(x.dim(2)) +
                     " do not match weight " + shape_string(weight.shape()));
  }
  return linear(x, weight, bias);
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for shape " + shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * len * inner + j;
      double mx = in[base];
      for (std::size_t t = 1; t < len; ++t) mx = std::max(mx, in[base + t * inner]);
      double z = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const double e = std::exp(in[base + t * inner] - mx);
        out[base + t * inner] = e;
        z += e;
      }
      for (std::size_t t = 0; t < len; ++t) out[base + t * inner] /= z;
    }
  }
  auto saved = std::make_shared<std::vector<double>>(out);
  return make_result("softmax", s, std::move(out), {x},
                     [saved, outer, inner, len](std::span<const double> g, const GradSlots& gin) {
                       const auto& y = *saved;
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t j = 0; j < inner; ++j) {
                           const std::size_t base = o * len * inner + j;
                           double dot = 0.0;
                           for (std::size_t t = 0; t < len; ++t) {
                             dot += g[base + t * inner] * y[base + t * inner];
                           }
                           for (std::size_t t = 0; t < len; ++t) {
                             const std::size_t i = base + t * inner;
                             gin[0][i] += y[i] * (g[i] - dot);
                           }
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps > 0.0)) throw ParameterError("layer_norm eps must be > 0, got " + std::to_string(eps));
  if (x.rank() == 0) throw ShapeError("layer_norm on a rank-0 tensor");
  const std::size_t c = x.shape().back();
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("layer_norm: gamma/beta " + shape_string(gamma.shape()) + "/" +
                     shape_string(beta.shape()) + " do not match channel extent " + std::to_string(c));
  }
  const std::size_t rows = x.numel() / c;
  const auto in = x.values(), ga = gamma.values(), be = beta.values();
  std::vector<double> out(in.size());
  auto xhat = std::make_shared<std::vector<double>>(in.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * c + j] = h;
      out[r * c + j] = h * ga[j] + be[j];
    }
  }
  return make_result(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [gamma, xhat, inv_std, rows, c](std::span<const double> g, const GradSlots& gin) {
        const auto ga = gamma.values();
        const auto& h = *xhat;
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t o = r * c;
          if (!gin[1].empty()) {
            for (std::size_t j = 0; j < c; ++j) gin[1][j] += g[o + j] * h[o + j];
          }
          if (!gin[2].empty()) {
            for (std::size_t j = 0; j < c; ++j) gin[2][j] += g[o + j];
          }
          if (!gin[0].empty()) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = g[o + j] * ga[j];
              m1 += dh;
              m2 += dh * h[o + j];
            }
            m1 *= inv_c;
            m2 *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = g[o + j] * ga[j];
              gin[0][o + j] += (*inv_std)[r] * (dh - m1 - h[o + j] * m2);
            }
          }
        }
      });
}

// -- data movement ------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape) +
                     " changes the element count");
  }
  return make_result("reshape", std::move(shape), std::vector<double>(x.values().begin(), x.values().end()),
                     {x}, [](std::span<const double> g, const GradSlots& gin) {
                       for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i];
                     });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const auto& s = x.shape();
  if (order.size() != s.size()) {
    throw ShapeError("permute order has " + std::to_string(order.size()) + " axes for shape " +
                     shape_string(s));
  }
  std::vector<bool> used(s.size(), false);
  for (auto ax : order) {
    if (ax >= s.size() || used[ax]) throw ShapeError("permute order is not a permutation");
    used[ax] = true;
  }
  const auto in_strides = strides_of(s);
  Shape out_shape(s.size());
  std::vector<std::size_t> src_stride(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out_shape[i] = s[order[i]];
    src_stride[i] = in_strides[order[i]];
  }
  const std::size_t n = x.numel();
  std::vector<long long> index(n);
  std::vector<std::size_t> pos(s.size(), 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < n; ++i) {
    index[i] = static_cast<long long>(src);
    for (std::size_t ax = s.size(); ax-- > 0;) {
      if (++pos[ax] < out_shape[ax]) {
        src += src_stride[ax];
        break;
      }
      src -= src_stride[ax] * (out_shape[ax] - 1);
      pos[ax] = 0;
    }
  }
  return detail::gather("permute", x, std::move(out_shape), std::move(index));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " out of bounds for shape " + shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = end - begin;
  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<long long> index;
  index.reserve(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t base = (o * s[axis] + begin + t) * inner;
      for (std::size_t j = 0; j < inner; ++j) index.push_back(static_cast<long long>(base + j));
    }
  }
  return detail::gather("slice", x, std::move(out_shape), std::move(index));
}

Tensor pad(const Tensor& x, const std::vector<std::pair<std::size_t, std::size_t>>& widths,
           PadMode mode) {
  const auto& s = x.shape();
  if (widths.size() != s.size()) {
    throw ShapeError("pad widths cover " + std::to_string(widths.size()) + " axes for shape " +
                     shape_string(s));
  }
  Shape out_shape(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (mode == PadMode::Reflect && s[i] == 0 && (widths[i].first || widths[i].second)) {
      throw ShapeError("cannot reflect-pad an empty axis");
    }
    out_shape[i] = s[i] + widths[i].first + widths[i].second;
  }
  const auto in_strides = strides_of(s);
  const std::size_t n = shape_numel(out_shape);
  std::vector<long long> index(n);
  std::vector<std::size_t> pos(s.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    long long src = 0;
    for (std::size_t ax = 0; ax < s.size() && src >= 0; ++ax) {
      long long p = static_cast<long long>(pos[ax]) - static_cast<long long>(widths[ax].first);
      const auto extent = static_cast<long long>(s[ax]);
      if (p < 0 || p >= extent) {
        if (mode == PadMode::Zero) {
          src = -1;
          break;
        }
        // Mirror without repeating the edge; periodic for widths beyond the extent.
        const long long period = 2 * (extent - 1);
        if (period == 0) {
          p = 0;
        } else {
          p = ((p % period) + period) % period;
          if (p >= extent) p = period - p;
        }
      }
      src += p * static_cast<long long>(in_strides[ax]);
    }
    index[i] = src;
    for (std::size_t ax = s.size(); ax-- > 0;) {
      if (++pos[ax] < out_shape[ax]) break;
      pos[ax] = 0;
    }
  }
  return detail::gather("pad", x, std::move(out_shape), std::move(index));
}

Tensor roll(const Tensor& x, const std::vector<long long>& offsets) {
  const auto& s = x.shape();
  if (offsets.size() != s.size()) {
    throw ShapeError("roll offsets cover " + std::to_string(offsets.size()) + " axes for shape " +
                     shape_string(s));
  }
  const auto st = strides_of(s);
  const std::size_t n = x.numel();
  std::vector<long long> index(n);
  std::vector<std::size_t> pos(s.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    long long src = 0;
    for (std::size_t ax = 0; ax < s.size(); ++ax) {
      const auto extent = static_cast<long long>(s[ax]);
      long long p = (static_cast<long long>(pos[ax]) - offsets[ax]) % extent;
      if (p < 0) p += extent;
      src += p * static_cast<long long>(st[ax]);
    }
    index[i] = src;
    for (std::size_t ax = s.size(); ax-- > 0;) {
      if (++pos[ax] < s[ax]) break;
      pos[ax] = 0;
    }
  }
  return detail::gather("roll", x, s, std::move(index));
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != sb.size() || sa.empty() ||
      !std::equal(sa.begin(), sa.end() - 1, sb.begin(), sb.end() - 1)) {
    throw ShapeError("concat: leading extents differ " + shape_string(sa) + " vs " + shape_string(sb));
  }
  const std::size_t ca = sa.back(), cb = sb.back(), rows = a.numel() / std::max<std::size_t>(ca, 1);
  std::vector<double> out(rows * (ca + cb));
  const auto x = a.values(), y = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(y.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  Shape shape = sa;
  shape.back() = ca + cb;
  return make_result("concat", std::move(shape), std::move(out), {a, b},
                     [rows, ca, cb](std::span<const double> g, const GradSlots& gin) {
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* src = g.data() + r * (ca + cb);
                         if (!gin[0].empty()) {
                           for (std::size_t j = 0; j < ca; ++j) gin[0][r * ca + j] += src[j];
                         }
                         if (!gin[1].empty()) {
                           for (std::size_t j = 0; j < cb; ++j) gin[1][r * cb + j] += src[ca + j];
                         }
                       }
                     });
}

}  // namespace evd
