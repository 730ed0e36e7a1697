// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
struct Access;
}

/// Dense row-major array of doubles with optional reverse-mode gradient.
///
/// A Tensor is a cheap handle: copies share the same storage and graph node.
/// Results of differentiable operations remember how they were produced when
/// any input requires a gradient; `backward()` replays those records in
/// reverse topological order and accumulates into every leaf that asked for a
/// gradient.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Writable view of a leaf's storage. Throws StateError on op results:
  /// tensors produced by the graph are never mutated in place.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  std::string_view op_kind() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Fresh leaf holding a copy of the values, with no history.
  Tensor detach() const;

  const void* identity() const noexcept { return node_.get(); }

private:
  friend struct detail::Access;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// When on, every op verifies its output is finite and throws NumericError
/// naming the op otherwise. Defaults to on in builds without NDEBUG.
void set_finite_checks(bool enabled) noexcept;
bool finite_checks() noexcept;

/// Reverse pass from a one-element tensor. The graph is consumed: a second
/// call through any of the same recorded ops throws StateError.
void backward(const Tensor& scalar_loss);

// -- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, double b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor power(const Tensor& a, double exponent);
Tensor gelu(const Tensor& a);

// -- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// -- linear algebra -----------------------------------------------------------

/// [m,k]x[k,n] -> [m,n], or batched [B,m,k]x[B,k,n] -> [B,m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Affine map over the last axis: x[..., k] * weight[k, n] + bias[n].
/// `bias` may be an undefined Tensor.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// 1x1 convolution of an H x W x Cin map; identical to `linear` with an
/// explicit channel check.
Tensor conv1x1(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes over the last axis, then applies gamma/beta (both [C]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// -- data movement ------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

enum class PadMode { Zero, Reflect };
/// `widths[i]` is the (before, after) padding of axis i. Reflect mode mirrors
/// without repeating the edge sample, periodically when a width exceeds the
/// extent.
Tensor pad(const Tensor& x, const std::vector<std::pair<std::size_t, std::size_t>>& widths,
           PadMode mode = PadMode::Zero);
/// Cyclic shift: out[i] = x[(i - offset) mod extent] along each axis.
Tensor roll(const Tensor& x, const std::vector<long long>& offsets);
/// Concatenation along the last axis.
Tensor concat_last(const Tensor& a, const Tensor& b);

/// Every op kind that records a vector-Jacobian product, by name.
std::span<const std::string_view> differentiable_ops();

// -- verification ---------------------------------------------------------------

using ScalarFn = std::function<Tensor(const Tensor&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

/// Compares the reverse-mode gradient of `f` at `x` with central differences.
/// `x` must be a leaf with requires_grad. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8). When
/// `max_coords` is nonzero only that many coordinates (chosen with `seed`)
/// are probed.
GradCheckResult finite_diff_check(const ScalarFn& f, Tensor& x, double eps,
                                  std::size_t max_coords = 0, unsigned long long seed = 0);

// -- debug dump -----------------------------------------------------------------
//
// Text fixture format: first line is the extents separated by spaces, then all
// values whitespace-separated in row-major order.

void write_dump(std::ostream& out, const Tensor& t);
Tensor read_dump(std::istream& in);

}  // namespace evd
