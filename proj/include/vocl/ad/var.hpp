#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace vocl {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the reverse-mode graph. `backward` reads `grad` of this node and
/// accumulates into the parents it captured.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(const Node&)> backward;

  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Accumulated gradient; zeros when none has reached this node.
  Matrix grad() const {
    return node_->grad.size() ? node_->grad : Matrix::Zero(node_->value.rows(), node_->value.cols());
  }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Scalar item() const { return node_->value(0, 0); }

  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }
  bool same_node(const Var& o) const { return node_ == o.node_; }

 private:
  NodePtr node_;
};

inline Var constant(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  return Var(std::move(n));
}

inline Var parameter(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  n->requires_grad = true;
  return Var(std::move(n));
}

/// Same value, cut from the graph (stop-gradient).
inline Var detach(const Var& v) { return constant(v.value()); }

/// Creates an op node. `bw(self)` is only recorded when some parent requires a gradient.
template <class Backward>
Var make_op(Matrix value, std::vector<Var> inputs, Backward&& bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (grad_enabled()) {
    for (const auto& in : inputs)
      if (in.requires_grad()) n->requires_grad = true;
    if (n->requires_grad) {
      n->parents.reserve(inputs.size());
      for (auto& in : inputs) n->parents.push_back(in.node());
      n->backward = std::forward<Backward>(bw);
    }
  }
  return Var(std::move(n));
}

/// Accumulates `g` into `v`'s gradient if `v` participates in differentiation.
template <class Expr>
inline void accumulate(const Var& v, const Expr& g) {
  if (v.requires_grad()) v.node()->grad_buffer() += g;
}

/// Reverse sweep from a scalar (1x1) root. The graph is released afterwards, so each
/// forward pass supports exactly one backward call; leaf gradients accumulate.
inline void backward(const Var& root) {
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size()) n->backward(*n);
  }
  // Release interior nodes front-to-back so destruction never recurses deeply.
  for (Node* n : order) {
    if (!n->parents.empty()) {
      n->backward = nullptr;
      n->parents.clear();
      n->grad.resize(0, 0);
    }
  }
}

}  // namespace ad

using ad::Var;

}  // namespace vocl
