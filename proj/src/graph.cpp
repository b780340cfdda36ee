// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#include "smt/graph.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"
#include "smt/error.hpp"

namespace smt {

namespace {

kernels::ConvDims conv_dims(const Shape& x, const Shape& w) {
  const std::size_t rows = x.size() == 3 ? x[0] : 1;
  return {rows, w[1], x.back(), w[0], w[2]};
}

}  // namespace

Graph::NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  evaluated_ = false;
  has_gradients_ = false;
  return nodes_.size() - 1;
}

void Graph::check_id(NodeId id) const {
  if (id >= nodes_.size())
    throw Error(ErrorCode::State, "graph node " + std::to_string(id) + " does not exist");
}

bool Graph::any_tracks(std::span<const NodeId> ids) const {
  return std::any_of(ids.begin(), ids.end(),
                     [&](NodeId i) { return nodes_[i].tracks_grad; });
}

Graph::NodeId Graph::input(Tensor value, bool requires_grad) {
  return input(std::make_shared<const Tensor>(std::move(value)), requires_grad);
}

Graph::NodeId Graph::input(std::shared_ptr<const Tensor> value, bool requires_grad) {
  if (!value) throw Error(ErrorCode::State, "graph leaf without a tensor");
  Node n;
  n.shape = value->shape();
  n.leaf = std::move(value);
  n.tracks_grad = requires_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::parameter(Tensor value) { return input(std::move(value), true); }

Graph::NodeId Graph::parameter(std::shared_ptr<const Tensor> value) {
  return input(std::move(value), true);
}

Graph::NodeId Graph::parameter(std::shared_ptr<const Tensor> value,
                               std::shared_ptr<const std::vector<std::uint8_t>> grad_mask) {
  const NodeId id = input(std::move(value), true);
  if (grad_mask) {
    if (grad_mask->size() != shape_size(nodes_[id].shape))
      throw Error(ErrorCode::Dimension, "parameter: gradient mask has " +
                                            std::to_string(grad_mask->size()) +
                                            " entries for shape " +
                                            shape_string(nodes_[id].shape));
    nodes_[id].grad_mask = std::move(grad_mask);
  }
  return id;
}

Graph::NodeId Graph::dense(NodeId x, NodeId weight, NodeId bias) {
  check_id(x);
  check_id(weight);
  check_id(bias);
  const Shape& xs = nodes_[x].shape;
  const Shape& ws = nodes_[weight].shape;
  const Shape& bs = nodes_[bias].shape;
  if (ws.size() != 2 || shape_size(bs) != ws[0] || shape_size(xs) != ws[1])
    throw Error(ErrorCode::Dimension, "dense: input " + shape_string(xs) +
                                          ", weight " + shape_string(ws) +
                                          ", bias " + shape_string(bs) +
                                          " do not conform");
  Node n;
  n.op = Op::Dense;
  n.inputs = {x, weight, bias};
  n.shape = {ws[0]};
  n.tracks_grad = any_tracks(n.inputs);
  return push(std::move(n));
}

Graph::NodeId Graph::conv_temporal(NodeId x, NodeId weight, NodeId bias) {
  check_id(x);
  check_id(weight);
  check_id(bias);
  const Shape& xs = nodes_[x].shape;
  const Shape& ws = nodes_[weight].shape;
  const Shape& bs = nodes_[bias].shape;
  if (ws.size() != 3 || shape_size(bs) != ws[0])
    throw Error(ErrorCode::Dimension, "conv_temporal: weight " + shape_string(ws) +
                                          " and bias " + shape_string(bs) +
                                          " do not conform");
  if ((xs.size() != 2 && xs.size() != 3) || xs[xs.size() - 2] != ws[1])
    throw Error(ErrorCode::Dimension, "conv_temporal: input " + shape_string(xs) +
                                          " does not match weight " + shape_string(ws));
  if (ws[2] > xs.back())
    throw Error(ErrorCode::Dimension,
                "conv_temporal: kernel width " + std::to_string(ws[2]) +
                    " exceeds input length " + std::to_string(xs.back()));
  const auto d = conv_dims(xs, ws);
  Node n;
  n.op = Op::ConvTemporal;
  n.inputs = {x, weight, bias};
  n.shape = xs.size() == 2 ? Shape{d.filters, d.out_length()}
                           : Shape{d.filters, d.rows, d.out_length()};
  n.tracks_grad = any_tracks(n.inputs);
  return push(std::move(n));
}

Graph::NodeId Graph::elu(NodeId x) {
  check_id(x);
  Node n;
  n.op = Op::Elu;
  n.inputs = {x};
  n.shape = nodes_[x].shape;
  n.tracks_grad = nodes_[x].tracks_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::avg_pool(NodeId x, std::size_t width) {
  check_id(x);
  Shape s = nodes_[x].shape;
  if (width == 0 || s.back() % width != 0)
    throw Error(ErrorCode::Dimension, "avg_pool: width " + std::to_string(width) +
                                          " does not divide length " +
                                          std::to_string(s.back()));
  s.back() /= width;
  Node n;
  n.op = Op::AvgPool;
  n.inputs = {x};
  n.shape = std::move(s);
  n.attr = width;
  n.tracks_grad = nodes_[x].tracks_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::reshape(NodeId x, Shape shape) {
  check_id(x);
  if (shape_size(shape) != shape_size(nodes_[x].shape))
    throw Error(ErrorCode::Dimension, "reshape: " + shape_string(nodes_[x].shape) +
                                          " to " + shape_string(shape));
  Node n;
  n.op = Op::Reshape;
  n.inputs = {x};
  n.shape = std::move(shape);
  n.tracks_grad = nodes_[x].tracks_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::softmax_cross_entropy(NodeId logits, std::size_t label) {
  check_id(logits);
  const std::size_t classes = shape_size(nodes_[logits].shape);
  if (label >= classes)
    throw Error(ErrorCode::Label, "label " + std::to_string(label) +
                                      " out of range for " + std::to_string(classes) +
                                      " classes");
  Node n;
  n.op = Op::SoftmaxCe;
  n.inputs = {logits};
  n.shape = {1};
  n.attr = label;
  n.tracks_grad = nodes_[logits].tracks_grad;
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const {
  check_id(id);
  const Node& n = nodes_[id];
  if (n.op == Op::Leaf) return *n.leaf;
  if (!evaluated_) throw Error(ErrorCode::State, "graph value read before forward()");
  return n.out;
}

const Shape& Graph::shape(NodeId id) const {
  check_id(id);
  return nodes_[id].shape;
}

void Graph::set_input(NodeId id, const Tensor& value) {
  check_id(id);
  Node& n = nodes_[id];
  if (n.op != Op::Leaf) throw Error(ErrorCode::State, "set_input on a non-leaf node");
  if (value.shape() != n.shape)
    throw Error(ErrorCode::Dimension, "set_input: expected " + shape_string(n.shape) +
                                          ", got " + shape_string(value.shape()));
  if (n.leaf.use_count() == 1) {
    // Sole owner: overwrite in place.
    auto dst = const_cast<Tensor&>(*n.leaf).data();
    std::copy(value.data().begin(), value.data().end(), dst.begin());
  } else {
    n.leaf = std::make_shared<const Tensor>(value);
  }
  evaluated_ = false;
  has_gradients_ = false;
}

void Graph::set_label(NodeId loss, std::size_t label) {
  check_id(loss);
  Node& n = nodes_[loss];
  if (n.op != Op::SoftmaxCe) throw Error(ErrorCode::State, "set_label on a non-loss node");
  const std::size_t classes = shape_size(nodes_[n.inputs[0]].shape);
  if (label >= classes)
    throw Error(ErrorCode::Label, "label " + std::to_string(label) +
                                      " out of range for " + std::to_string(classes) +
                                      " classes");
  n.attr = label;
  evaluated_ = false;
  has_gradients_ = false;
}

void Graph::forward() {
  for (auto& n : nodes_) {
    if (n.op == Op::Leaf) continue;
    const Tensor& a = value_unchecked(n.inputs[0]);
    if (n.out.shape() != n.shape) n.out = Tensor(n.shape);
    const std::span<double> y = n.out.data();
    switch (n.op) {
      case Op::Dense:
        kernels::dense(a.data(), value_unchecked(n.inputs[1]).data(),
                       value_unchecked(n.inputs[2]).data(), y);
        break;
      case Op::ConvTemporal: {
        const Tensor& w = value_unchecked(n.inputs[1]);
        kernels::conv(conv_dims(a.shape(), w.shape()), a.data(), w.data(),
                      value_unchecked(n.inputs[2]).data(), y);
        break;
      }
      case Op::Elu:
        kernels::elu(a.data(), y);
        break;
      case Op::AvgPool:
        kernels::avg_pool(a.data(), n.attr, y);
        break;
      case Op::Reshape:
        std::copy(a.data().begin(), a.data().end(), y.begin());
        break;
      case Op::SoftmaxCe:
        n.probs = ops::softmax(a.data());
        y[0] = ops::softmax_cross_entropy(a, n.attr);
        break;
      case Op::Leaf:
        break;
    }
  }
  evaluated_ = true;
  has_gradients_ = false;
}

Tensor& Graph::grad_of(NodeId id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    if (n.grad.shape() != n.shape)
      n.grad = Tensor(n.shape);
    else
      std::fill(n.grad.data().begin(), n.grad.data().end(), 0.0);
    n.grad_live = true;
  }
  return n.grad;
}

void Graph::backward(NodeId output, double seed) {
  check_id(output);
  if (!evaluated_) throw Error(ErrorCode::State, "backward() called before forward()");
  if (shape_size(nodes_[output].shape) != 1)
    throw Error(ErrorCode::Dimension, "backward() needs a scalar output, got " +
                                          shape_string(nodes_[output].shape));
  for (auto& n : nodes_) n.grad_live = false;
  if (nodes_[output].tracks_grad) {
    grad_of(output)[0] = seed;
    for (std::size_t i = output + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.op == Op::Leaf || !n.tracks_grad || !n.grad_live) continue;
      backward_node(n);
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Tensor& g = grad_of(i);
    if (const auto& mask = nodes_[i].grad_mask) {
      auto v = g.data();
      for (std::size_t j = 0; j < v.size(); ++j)
        if (!(*mask)[j]) v[j] = 0.0;
    }
  }
  has_gradients_ = true;
}

void Graph::backward_node(Node& n) {
  const std::span<const double> gy = n.grad.data();
  auto grad_span = [&](std::size_t k) -> std::span<double> {
    const NodeId id = n.inputs[k];
    if (!nodes_[id].tracks_grad) return {};
    return grad_of(id).data();
  };
  switch (n.op) {
    case Op::Dense: {
      kernels::dense_backward(value_unchecked(n.inputs[0]).data(),
                              value_unchecked(n.inputs[1]).data(), gy,
                              grad_span(0), grad_span(1), grad_span(2));
      break;
    }
    case Op::ConvTemporal: {
      const Tensor& x = value_unchecked(n.inputs[0]);
      const Tensor& w = value_unchecked(n.inputs[1]);
      const auto& mask = nodes_[n.inputs[1]].grad_mask;
      kernels::conv_backward(conv_dims(x.shape(), w.shape()), x.data(), w.data(),
                             gy, grad_span(0), grad_span(1), grad_span(2),
                             mask ? mask->data() : nullptr);
      break;
    }
    case Op::Elu:
      kernels::elu_backward(n.out.data(), gy, grad_span(0));
      break;
    case Op::AvgPool: {
      auto gx = grad_span(0);
      const double inv = 1.0 / static_cast<double>(n.attr);
      for (std::size_t o = 0; o < gy.size(); ++o) {
        const double g = gy[o] * inv;
        for (std::size_t i = 0; i < n.attr; ++i) gx[o * n.attr + i] += g;
      }
      break;
    }
    case Op::Reshape: {
      auto gx = grad_span(0);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
      break;
    }
    case Op::SoftmaxCe: {
      auto gx = grad_span(0);
      const double g = gy[0];
      for (std::size_t c = 0; c < n.probs.size(); ++c)
        gx[c] += g * (n.probs[c] - (c == n.attr ? 1.0 : 0.0));
      break;
    }
    case Op::Leaf:
      break;
  }
}

const Tensor& Graph::gradient(NodeId id) const {
  check_id(id);
  if (!has_gradients_) throw Error(ErrorCode::State, "gradient read before backward()");
  return nodes_[id].grad;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& theta, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::Input, "finite difference step must be positive");
  Tensor grad(theta.shape());
  Tensor probe = theta;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    probe[j] = theta[j] + eps;
    const double up = f(probe);
    probe[j] = theta[j] - eps;
    const double down = f(probe);
    probe[j] = theta[j];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw Error(ErrorCode::Numeric, "non-finite function value at coordinate " +
                                          std::to_string(j));
    grad[j] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace smt
