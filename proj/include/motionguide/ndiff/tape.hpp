#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "motionguide/ndiff/tensor.hpp"

namespace mg::nd {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Gradient after Tape::backward; empty when no gradient reached this node.
  const Tensor& grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of a computation. Nodes are appended in evaluation
/// order, so reverse insertion order is a valid topological order.
class Tape {
 public:
  /// Receives the upstream gradient of the node being differentiated.
  using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is readable through Var::grad after backward.
  Var variable(Tensor value);
  /// Leaf bound to a parameter; backward adds into parameter.grad.
  Var param(Parameter& parameter);

  /// Records an op result. Parents must already be on this tape.
  Var push(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  void backward(Var output);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& grad(std::size_t id) const { return nodes_.at(id).grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  /// Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

  /// Count of cross-entropy evaluations that hit the probability floor.
  std::size_t floor_events() const noexcept { return floor_events_; }
  void note_floor_event() noexcept { ++floor_events_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Tensor* sink = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::size_t floor_events_ = 0;
};

}  // namespace mg::nd
