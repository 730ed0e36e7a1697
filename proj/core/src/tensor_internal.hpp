// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "evd/tensor.hpp"

namespace evd::detail {

/// Gradient destinations handed to a vjp, one per recorded input. The span is
/// empty when that input does not need a gradient.
using GradSlots = std::vector<std::span<double>>;
using VjpFn = std::function<void(std::span<const double> out_grad, const GradSlots& in_grads)>;

struct OpRecord {
  std::string_view kind;
  std::vector<std::shared_ptr<Node>> inputs;
  VjpFn vjp;
};

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool released = false;       // record consumed by a backward pass
  bool backward_root = false;  // already used as the root of backward()
  std::optional<OpRecord> record;
};

struct Access {
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }
};

/// Builds an op result. The record is attached only when grad mode is on and
/// some input requires a gradient; the finite check runs when enabled.
Tensor make_result(std::string_view kind, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs, VjpFn vjp);

/// Generic gather: out[i] = src[index[i]], or 0 when index[i] < 0. The vjp
/// scatter-adds. Used by every pure data-movement op.
Tensor gather(std::string_view kind, const Tensor& src, Shape out_shape,
              std::vector<long long> index);

}  // namespace evd::detail
