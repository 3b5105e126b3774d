#include "motionguide/ndiff/tape.hpp"

#include "motionguide/errors.hpp"

namespace mg::nd {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, true});
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& parameter) {
  if (parameter.grad.shape() != parameter.value.shape()) parameter.grad = Tensor(parameter.value.shape());
  nodes_.push_back(Node{parameter.value, {}, {}, {}, &parameter.grad, true});
  return {this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  const std::size_t id = nodes_.size();
  bool needs = false;
  for (std::size_t p : parents) {
    // Parents precede the node, so the recorded graph cannot contain a cycle.
    if (p >= id) throw structural_error("op parent " + std::to_string(p) + " is not on the tape");
    needs = needs || nodes_[p].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, std::move(parents), needs ? std::move(backward) : BackwardFn{},
                        nullptr, needs});
  return {this, id};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var output) {
  if (&output.tape() != this) throw structural_error("backward called with a Var from another tape");
  const std::size_t root = output.id();
  if (nodes_.at(root).value.size() != 1) {
    throw structural_error("backward requires a scalar output, got shape " +
                           shape_string(nodes_[root].value.shape()));
  }
  for (Node& node : nodes_) node.grad = Tensor();
  grad_buffer(root)[0] = 1.0;
  for (std::size_t id = root + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) {
      // nodes_ is not resized during the sweep, so these references stay valid.
      node.backward(*this, node.grad);
    } else if (node.sink) {
      auto sink = node.sink->data();
      auto g = node.grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) sink[i] += g[i];
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  floor_events_ = 0;
}

}  // namespace mg::nd
