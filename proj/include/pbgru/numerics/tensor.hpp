// SPDX-License-Identifier: Apache-2.0
//
// Dense real tensors with reverse-mode differentiation. Every op result
// records its parents and a backward closure; backward() on a scalar walks
// the recorded graph in reverse topological order.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pbgru/numerics/matrix.hpp"

namespace pbgru {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  // Sized like value for leaves that require grad and for every tracked
  // intermediate during a backward pass; empty otherwise.
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  double value(std::size_t flat_index) const { return values()[flat_index]; }
  double item() const;

  /// Writable view of a leaf's values (optimizer updates, finite-difference
  /// perturbation). Throws for op results.
  std::span<double> mutable_values();

  /// Accumulated gradient; empty when the tensor is not tracked.
  std::span<const double> grad() const;
  bool requires_grad() const;
  bool is_leaf() const;
  void zero_grad();
  /// Adds externally computed gradient values to a tracked leaf.
  void accumulate_grad(std::span<const double> delta);

  /// Reverse-mode pass from a single-element tensor. Intermediate gradients
  /// are recomputed from zero on each call; leaf gradients accumulate until
  /// zero_grad().
  void backward() const;

  /// Untracked copy of the current values.
  Tensor detach() const;
  Matrix to_matrix() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  const detail::Node& checked() const;
  std::shared_ptr<detail::Node> node_;
};

/// A trainable tensor together with its stable checkpoint name.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

}  // namespace pbgru
