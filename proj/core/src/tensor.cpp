// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "evd/error.hpp"
#include "evd/tensor.hpp"
#include "tensor_internal.hpp"

namespace evd {

namespace {

thread_local bool g_grad_enabled = true;

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw StateError("operation on an undefined tensor");
  return *node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_string(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).data.size(); }

std::span<const double> Tensor::values() const { return checked(node_).data; }

std::span<double> Tensor::mutable_values() {
  auto& n = checked(node_);
  if (n.record || n.released) throw StateError("in-place write to an op result");
  return n.data;
}

double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.data.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(n.shape));
  }
  return n.data[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  auto& n = checked(node_);
  if (n.record) throw StateError("requires_grad can only be changed on leaves");
  n.requires_grad = flag;
}

bool Tensor::is_leaf() const {
  const auto& n = checked(node_);
  return !n.record && !n.released;
}

std::string_view Tensor::op_kind() const {
  const auto& n = checked(node_);
  return n.record ? n.record->kind : std::string_view("leaf");
}

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

void Tensor::zero_grad() { checked(node_).grad.clear(); }

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(n.shape, n.data, false);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

void set_finite_checks(bool enabled) noexcept { g_finite_checks = enabled; }
bool finite_checks() noexcept { return g_finite_checks; }

namespace detail {

Tensor make_result(std::string_view kind, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs, VjpFn vjp) {
  if (g_finite_checks) {
    for (double v : data) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite value produced by op '" + std::string(kind) + "'");
      }
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);

  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.defined() && Access::node(in)->requires_grad) needs = true;
    }
  }
  if (needs) {
    node->requires_grad = true;
    OpRecord rec;
    rec.kind = kind;
    for (const auto& in : inputs) rec.inputs.push_back(in.defined() ? Access::node(in) : nullptr);
    rec.vjp = std::move(vjp);
    node->record = std::move(rec);
  }
  return Access::wrap(std::move(node));
}

Tensor gather(std::string_view kind, const Tensor& src, Shape out_shape,
              std::vector<long long> index) {
  const auto in = src.values();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out[i] = index[i] < 0 ? 0.0 : in[static_cast<std::size_t>(index[i])];
  }
  return make_result(kind, std::move(out_shape), std::move(out), {src},
                     [index = std::move(index)](std::span<const double> g, const GradSlots& gin) {
                       auto dst = gin[0];
                       for (std::size_t i = 0; i < index.size(); ++i) {
                         if (index[i] >= 0) dst[static_cast<std::size_t>(index[i])] += g[i];
                       }
                     });
}

}  // namespace detail

void backward(const Tensor& scalar_loss) {
  using detail::Node;
  const auto& root = detail::Access::node(scalar_loss);
  if (!root) throw StateError("backward on an undefined tensor");
  if (root->data.size() != 1) {
    throw ShapeError("backward needs a one-element loss, got shape " + shape_string(root->shape));
  }
  if (root->backward_root || root->released) {
    throw StateError("backward called twice on the same graph");
  }
  if (!root->requires_grad) throw StateError("backward on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order (inputs before users).
  // The order owns its nodes: releasing a record below may drop the last
  // other reference to an intermediate result.
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack{{root, 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->released) throw StateError("backward through a graph that was already consumed");
    if (node->record && next < node->record->inputs.size()) {
      const auto& child = node->record->inputs[next++];
      if (child && child->requires_grad && seen.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(std::move(node));
    stack.pop_back();
  }

  root->backward_root = true;
  root->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = it->get();
    if (!node->record) continue;
    auto& rec = *node->record;
    detail::GradSlots slots(rec.inputs.size());
    for (std::size_t i = 0; i < rec.inputs.size(); ++i) {
      Node* in = rec.inputs[i].get();
      if (!in || !in->requires_grad) continue;
      if (in->grad.empty()) in->grad.assign(in->data.size(), 0.0);
      slots[i] = in->grad;
    }
    if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
    rec.vjp(node->grad, slots);
    node->record.reset();
    node->released = true;
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

void write_dump(std::ostream& out, const Tensor& t) {
  const auto& s = t.shape();
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
  out << '\n';
  const auto v = t.values();
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  out << '\n';
  out.precision(old_precision);
}

Tensor read_dump(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("tensor dump: missing shape line");
  std::istringstream hs(header);
  Shape shape;
  std::size_t e = 0;
  while (hs >> e) shape.push_back(e);
  if (shape.empty()) throw DataError("tensor dump: empty shape line");
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) {
    if (!(in >> v)) throw DataError("tensor dump: fewer values than shape " + shape_string(shape));
  }
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace evd
