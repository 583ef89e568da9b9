// SPDX-License-Identifier: Apache-2.0
#include "pbgru/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "pbgru/numerics/errors.hpp"

namespace pbgru {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " given " + std::to_string(values.size()) + " values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in tensor construction");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_values(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_values(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_values({1}, {value}, requires_grad); }

Tensor Tensor::from_matrix(const Matrix& m) { return from_values({m.rows, m.cols}, m.data); }

const detail::Node& Tensor::checked() const {
  if (!node_) throw ShapeError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().value.size(); }

std::span<const double> Tensor::values() const { return checked().value; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

std::span<double> Tensor::mutable_values() {
  checked();
  if (!node_->leaf) throw ShapeError("mutable_values() is only available on leaf tensors");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return checked().grad; }

bool Tensor::requires_grad() const { return checked().requires_grad; }

bool Tensor::is_leaf() const { return checked().leaf; }

void Tensor::zero_grad() {
  checked();
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::accumulate_grad(std::span<const double> delta) {
  checked();
  if (!node_->leaf || !node_->requires_grad || delta.size() != node_->grad.size()) {
    throw ShapeError("accumulate_grad() needs a tracked leaf of matching size");
  }
  for (std::size_t i = 0; i < delta.size(); ++i) node_->grad[i] += delta[i];
}

void Tensor::backward() const {
  const detail::Node& root = checked();
  if (root.value.size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(root.shape));
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) {
    if (!node->leaf) node->grad.assign(node->value.size(), 0.0);
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->leaf && node->backward) node->backward(*node);
  }
  for (detail::Node* node : order) {
    if (!node->leaf) continue;
    for (double g : node->grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient reached a leaf tensor");
    }
  }
}

Tensor Tensor::detach() const {
  const detail::Node& n = checked();
  return from_values(n.shape, n.value, false);
}

Matrix Tensor::to_matrix() const {
  if (rank() != 2) throw ShapeError("to_matrix() on tensor of shape " + shape_str(shape()));
  Matrix m(dim(0), dim(1));
  m.data.assign(node_->value.begin(), node_->value.end());
  return m;
}

}  // namespace pbgru
