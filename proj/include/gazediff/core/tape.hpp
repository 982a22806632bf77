#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <utility>
#include <vector>

#include "gazediff/core/tensor.hpp"

namespace gazediff {

template <class T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape; }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  std::size_t id() const { return id_; }
  Tape<T>& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of primitive evaluations. Backward replays the record in reverse,
/// so every node's gradient is complete before its backward rule runs.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> v) { return push(std::move(v), nullptr, false, {}); }
  Var<T> variable(Tensor<T> v) { return push(std::move(v), nullptr, true, {}); }

  /// Leaf that borrows `ref`; the referenced tensor must outlive the tape and stay unmodified.
  Var<T> parameter(const Tensor<T>& ref) { return push({}, &ref, grad_enabled_, {}); }

  /// Records an op output. The backward rule is kept only when some input needs a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
    bool needs = false;
    if (grad_enabled_)
      for (const auto& in : inputs) needs = needs || in.requires_grad();
    return push(std::move(value), nullptr, needs, needs ? std::move(fn) : BackwardFn{});
  }

  void backward(Var<T> loss) {
    if (loss.size() != 1) throw DimensionError("backward: loss must be scalar, got " + to_string(loss.shape()));
    for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), T{0});
    if (!requires_grad(loss.id())) return;
    grad(loss.id())[0] = T{1};
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed ? *n.borrowed : n.owned;
  }

  /// Gradient buffer of node `id`, allocated as zeros on first access.
  std::vector<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(value(id).size(), T{0});
    return n.grad;
  }

  /// Gradient of a leaf after backward(); zeros if nothing reached it.
  Tensor<T> grad_of(Var<T> v) {
    return Tensor<T>(v.shape(), grad(v.id()));
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    std::vector<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<T> push(Tensor<T> v, const Tensor<T>* borrowed, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(v), borrowed, {}, requires_grad, std::move(fn)});
    return Var<T>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace gazediff
