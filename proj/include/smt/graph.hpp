// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "smt/tensor.hpp"

namespace smt {

/// Tape of operations over the fixed op vocabulary used by the model.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. Shapes are checked when a node is added;
/// values are produced by forward() and gradients by backward().
/// Leaves hold shared read-only tensors, so one set of weights can feed
/// many graphs.
class Graph {
 public:
  using NodeId = std::size_t;

  NodeId input(Tensor value, bool requires_grad = false);
  NodeId input(std::shared_ptr<const Tensor> value, bool requires_grad = false);
  NodeId parameter(Tensor value);
  NodeId parameter(std::shared_ptr<const Tensor> value);
  /// A parameter whose gradient is only needed where `grad_mask` is nonzero;
  /// elsewhere gradient() reads zero and the work is skipped when possible.
  NodeId parameter(std::shared_ptr<const Tensor> value,
                   std::shared_ptr<const std::vector<std::uint8_t>> grad_mask);

  NodeId dense(NodeId x, NodeId weight, NodeId bias);
  NodeId conv_temporal(NodeId x, NodeId weight, NodeId bias);
  NodeId elu(NodeId x);
  NodeId avg_pool(NodeId x, std::size_t width);
  NodeId reshape(NodeId x, Shape shape);
  NodeId softmax_cross_entropy(NodeId logits, std::size_t label);

  /// Replaces the value of an input leaf with a tensor of the same shape.
  /// Buffers are reused, so one graph can be evaluated for many inputs.
  void set_input(NodeId id, const Tensor& value);
  /// Changes the target class of a softmax_cross_entropy node.
  void set_label(NodeId loss, std::size_t label);

  void forward();

  /// Reverse sweep from a scalar node. `seed` scales the output gradient,
  /// so backward(loss, a) yields the gradients of a * loss.
  void backward(NodeId output, double seed = 1.0);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward() output with respect to `id`; zeros
  /// when the node has no path to the output or does not track gradients.
  const Tensor& gradient(NodeId id) const;
  const Shape& shape(NodeId id) const;

  bool evaluated() const noexcept { return evaluated_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  enum class Op { Leaf, Dense, ConvTemporal, Elu, AvgPool, Reshape, SoftmaxCe };

  struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> inputs;
    Shape shape;
    std::shared_ptr<const Tensor> leaf;
    std::shared_ptr<const std::vector<std::uint8_t>> grad_mask;
    Tensor out;
    Tensor grad;
    bool grad_live = false;  // grad holds this pass's values
    bool tracks_grad = false;
    std::size_t attr = 0;  // pool width or class label
    std::vector<double> probs;
  };

  NodeId push(Node node);
  void check_id(NodeId id) const;
  const Tensor& value_unchecked(NodeId id) const {
    const Node& n = nodes_[id];
    return n.op == Op::Leaf ? *n.leaf : n.out;
  }
  bool any_tracks(std::span<const NodeId> ids) const;
  void backward_node(Node& node);
  Tensor& grad_of(NodeId id);

  std::vector<Node> nodes_;
  bool evaluated_ = false;
  bool has_gradients_ = false;
};

/// Central differences (f(t + eps e_j) - f(t - eps e_j)) / (2 eps).
Tensor finite_difference_gradient(
    const std::function<double(const Tensor&)>& f, const Tensor& theta,
    double eps);

}  // namespace smt
