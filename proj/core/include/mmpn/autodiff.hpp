#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "mmpn/tensor.hpp"

namespace mmpn::nn {

// Reverse-mode tape over a dynamically built graph. Nodes are created in
// forward order; backward() walks a depth-first topological order from the
// loss. Single-threaded per graph by design, which also makes every run
// bitwise reproducible.

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated during backward; same shape as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node<T>&)> backward_fn;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

  static Var from_node(std::shared_ptr<Node<T>> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Graph construction can be disabled for inference.
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Guided-backprop mode: ReLU backward additionally gates on the sign of the
// incoming gradient. Consulted when the backward pass runs.
inline bool& guided_backprop_flag() {
  thread_local bool enabled = false;
  return enabled;
}

class GuidedBackpropGuard {
 public:
  GuidedBackpropGuard() : previous_(guided_backprop_flag()) { guided_backprop_flag() = true; }
  ~GuidedBackpropGuard() { guided_backprop_flag() = previous_; }
  GuidedBackpropGuard(const GuidedBackpropGuard&) = delete;
  GuidedBackpropGuard& operator=(const GuidedBackpropGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
Tensor<T>& ensure_grad(Node<T>& node) {
  if (node.grad.data.empty()) node.grad = Tensor<T>(node.value.shape, T(0));
  return node.grad;
}

// Wires a new graph node. The value is checked for NaN/Inf regardless of
// grad mode so numerical failures always name their op.
template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
  check_finite(value, op);
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled_flag()) {
    bool any = false;
    for (const auto& p : parents) any = any || (p.defined() && p.requires_grad());
    if (any) {
      node->requires_grad = true;
      for (auto& p : parents) node->parents.push_back(p.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var<T>::from_node(std::move(node));
}

// Backpropagates d(loss)/d(node) into every reachable node's grad buffer.
// The loss must be scalar (a single element).
template <typename T>
void backward(const Var<T>& loss) {
  if (!loss.defined()) throw ValidationError("backward: undefined loss");
  if (loss.value().size() != 1) {
    throw ValidationError("backward: loss must be scalar, got " + loss.value().shape_str());
  }
  if (!loss.requires_grad()) {
    throw ValidationError("backward: loss does not depend on any tracked parameter");
  }

  // Iterative DFS postorder; reversed it gives a valid execution order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  ensure_grad(*loss.node());
  loss.node()->grad.data[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

}  // namespace mmpn::nn
