#include "memiml/numgrad/tape.hpp"

#include <optional>

#include "memiml/numgrad/ops.hpp"

namespace memiml::numgrad {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  require_finite(value, "leaf");
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape() != this) throw std::logic_error("Var belongs to a different tape");
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (const auto& in : inputs) {
    check_owned(in);
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  if (!needs_grad) backward = nullptr;
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), needs_grad});
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::gradients(const Var& loss, std::span<const Var> wrt, GradOptions opts,
                                 std::vector<std::size_t>* unreachable) {
  check_owned(loss);
  if (loss.value().size() != 1) {
    throw ShapeError("gradients() needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  const std::size_t end = loss.id() + 1;
  std::vector<std::optional<Var>> grads(end);
  grads[loss.id()] = constant(Tensor::filled(loss.shape(), 1.0));

  for (std::size_t i = end; i-- > 0;) {
    if (!grads[i]) continue;
    // copy out: backward() appends to nodes_
    const BackwardFn fn = nodes_[i].backward;
    const std::vector<Var> inputs = nodes_[i].inputs;
    if (!fn) continue;
    const std::vector<Var> input_grads = fn(*grads[i], Var(this, i));
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto in = inputs[k].id();
      if (k >= input_grads.size() || !input_grads[k].valid() || !nodes_[in].requires_grad) continue;
      grads[in] = grads[in] ? add(*grads[in], input_grads[k]) : input_grads[k];
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    const Var& w = wrt[k];
    check_owned(w);
    if (w.id() >= end || !grads[w.id()]) {
      note("gradient: input #" + std::to_string(k) + " is unreachable from the loss; returning zeros");
      if (unreachable) unreachable->push_back(k);
      out.push_back(constant(Tensor::zeros(w.shape())));
      continue;
    }
    const Var g = *grads[w.id()];
    out.push_back(opts.create_graph ? g : constant(g.value()));
  }
  return out;
}

}  // namespace memiml::numgrad
