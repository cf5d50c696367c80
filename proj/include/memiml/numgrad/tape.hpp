#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "memiml/numgrad/tensor.hpp"

namespace memiml::numgrad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning Tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Computes the gradients of a node's inputs given the gradient of its output
// and the node itself. Built from recorded ops, so the returned gradients are
// themselves differentiable. An invalid Var in the result means "no gradient".
using BackwardFn = std::function<std::vector<Var>(const Var& grad_out, const Var& self)>;

struct GradOptions {
  // Keep the backward pass on the tape so the returned gradients can be
  // differentiated again. Without it the gradients come back as constants.
  bool create_graph = false;
};

// Append-only record of primitive ops. Nodes only reference earlier nodes, so
// node ids are a topological order. A Tape is single-writer.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);

  // Reverse-mode gradients of a scalar `loss` with respect to each of `wrt`.
  // Inputs the loss does not depend on get a zero gradient and a diagnostic;
  // their positions are appended to `unreachable` when given.
  std::vector<Var> gradients(const Var& loss, std::span<const Var> wrt, GradOptions opts = {},
                             std::vector<std::size_t>* unreachable = nullptr);

  // Records a new node. Used by the op library.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  void note(std::string message) { diagnostics_.push_back(std::move(message)); }

 private:
  struct Node {
    Tensor value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(const Var& v) const;

  // deque keeps value references stable while nodes are appended
  std::deque<Node> nodes_;
  std::vector<std::string> diagnostics_;
};

}  // namespace memiml::numgrad
