#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sdc/nn/tensor.hpp"

namespace sdc::nn {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates `grad` of this node into its parents' grads.
  std::function<void(const Tensor<T>&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a node of the computation graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  explicit operator bool() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->grad.empty(); }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor<T>(); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Wraps an op result. The backward closure is kept only when recording
/// is on and some parent needs a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, const std::vector<Var<T>>& parents,
                   std::function<void(const Tensor<T>&)> backward) {
  bool needs = false;
  if (grad_enabled())
    for (const Var<T>& p : parents) needs = needs || p.requires_grad();
  Var<T> out(std::move(value), needs);
  if (needs) {
    for (const Var<T>& p : parents)
      if (p.requires_grad()) out.node()->parents.push_back(p.node());
    out.node()->backward = std::move(backward);
  }
  return out;
}

/// Reverse-mode sweep from a scalar root (seed gradient 1). Gradients of
/// leaves accumulate; intermediate gradients are released afterwards.
template <typename T>
void backward(const Var<T>& root);

template <typename T>
Var<T> constant(Tensor<T> t) {
  return Var<T>(std::move(t), false);
}

}  // namespace sdc::nn
