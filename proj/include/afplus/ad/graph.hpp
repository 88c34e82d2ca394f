#pragma once

// Dynamic-tape reverse mode. Every node's backward rule is written with the
// same differentiable ops, so gradients computed with create_graph = true
// can be differentiated again (used to unroll an optimizer).

#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "afplus/ad/tensor.hpp"

namespace afp::ad {

struct Node;

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  /// Value that never receives a gradient.
  static Var constant(Tensor4 t);
  /// Differentiable input.
  static Var leaf(Tensor4 t);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor4& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const noexcept;
  double item() const;

  Node* get() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad_out)>;

struct Node {
  Tensor4 value;
  std::vector<Var> inputs;
  BackwardFn backward;
  bool requires_grad = false;

  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  // Long unrolled chains would recurse once per node on destruction; hand
  // uniquely owned inputs to a thread-local queue instead.
  ~Node() {
    thread_local std::vector<std::shared_ptr<Node>> pending;
    thread_local bool draining = false;
    for (auto& in : inputs) {
      if (in.ptr() && in.ptr().use_count() == 1) pending.push_back(in.ptr());
    }
    inputs.clear();
    backward = nullptr;
    if (draining) return;
    draining = true;
    while (!pending.empty()) {
      auto n = std::move(pending.back());
      pending.pop_back();
      n.reset();
    }
    draining = false;
  }
};

inline Var Var::constant(Tensor4 t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return Var(std::move(n));
}

inline Var Var::leaf(Tensor4 t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = true;
  return Var(std::move(n));
}

inline const Tensor4& Var::value() const {
  require(node_ != nullptr, "Var: undefined");
  return node_->value;
}

inline bool Var::requires_grad() const noexcept { return node_ && node_->requires_grad; }

inline double Var::item() const {
  require(value().size() == 1, "Var::item: tensor has " + std::to_string(value().size()) + " elements");
  return value()[0];
}

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

/// Scoped override of whether new ops are recorded.
class GradMode {
 public:
  explicit GradMode(bool enabled) : prev_(detail::grad_mode()) { detail::grad_mode() = enabled; }
  ~GradMode() { detail::grad_mode() = prev_; }
  GradMode(const GradMode&) = delete;
  GradMode& operator=(const GradMode&) = delete;

 private:
  bool prev_;
};

/// Wrap a freshly computed value; records the op only when some input needs
/// a gradient and recording is on.
inline Var record(Tensor4 value, std::vector<Var> inputs, BackwardFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& v : inputs) any = any || v.requires_grad();
    if (any) {
      n->inputs = std::move(inputs);
      n->backward = std::move(fn);
      n->requires_grad = true;
    }
  }
  return Var(std::move(n));
}

Var add(const Var& a, const Var& b);

namespace detail {

// Reverse topological order of the subgraph of `root` that requires grad.
inline std::vector<std::shared_ptr<Node>> topo_order(const std::shared_ptr<Node>& root) {
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_map<Node*, bool> seen;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack{{root, 0}};
  seen[root.get()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++].ptr();
      if (child && child->requires_grad && !seen[child.get()]) {
        seen[child.get()] = true;
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // children before parents
}

}  // namespace detail

/// Gradients of `y` (seeded with `seed`, default ones) with respect to each
/// entry of `wrt`. Entries not reached get zeros. With create_graph the
/// result is itself differentiable.
inline std::vector<Var> grad(const Var& y, const std::vector<Var>& wrt, bool create_graph = false,
                             const Var* seed = nullptr) {
  require(y.defined(), "grad: undefined output");
  std::vector<Var> out;
  out.reserve(wrt.size());
  GradMode mode(create_graph);
  auto zeros_like = [](const Var& v) { return Var::constant(Tensor4(v.shape())); };
  if (!y.requires_grad()) {
    for (const auto& w : wrt) out.push_back(zeros_like(w));
    return out;
  }
  Var g0 = seed ? *seed : Var::constant(Tensor4(y.shape(), 1.0));
  require(g0.shape() == y.shape(), "grad: seed shape " + g0.shape().str() + " != output " + y.shape().str());

  const auto order = detail::topo_order(y.ptr());
  std::unordered_map<Node*, bool> keep;
  for (const auto& w : wrt) keep[w.get()] = true;
  // Only nodes with a path to some wrt entry need their backward rule run;
  // this keeps repeated gradients of an unrolled loop linear in its length.
  std::unordered_map<Node*, bool> relevant;
  for (const auto& n : order) {
    bool r = keep.count(n.get()) > 0;
    for (const auto& in : n->inputs) r = r || (in.get() && relevant[in.get()]);
    relevant[n.get()] = r;
  }
  std::unordered_map<Node*, Var> grads;
  grads[y.get()] = g0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = it->get();
    auto found = grads.find(node);
    if (found == grads.end() || !node->backward || !relevant[node]) continue;
    const Var g = found->second;
    const auto gin = node->backward(Var(*it), g);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      Node* in = node->inputs[i].get();
      if (!in || !relevant[in] || !gin[i].defined()) continue;
      auto slot = grads.find(in);
      if (slot == grads.end()) {
        grads.emplace(in, gin[i]);
      } else {
        slot->second = add(slot->second, gin[i]);
      }
    }
    if (!keep.count(node)) grads.erase(node);  // release as we go
  }
  for (const auto& w : wrt) {
    auto found = grads.find(w.get());
    out.push_back(found != grads.end() ? found->second : zeros_like(w));
  }
  return out;
}

}  // namespace afp::ad
