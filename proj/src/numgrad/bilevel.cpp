#include "memiml/numgrad/bilevel.hpp"

namespace memiml::numgrad {

const char* to_string(OuterGradMode mode) {
  return mode == OuterGradMode::second_order ? "second-order" : "first-order";
}

VarParams inner_update(const VarParams& params, const LossFn& inner_loss, double lr, int steps, OuterGradMode mode) {
  VarParams current = params;
  const GradOptions opts{.create_graph = mode == OuterGradMode::second_order};
  for (int s = 0; s < steps && lr != 0.0; ++s) {
    const Var loss = inner_loss(current);
    current = sgd_step(current, grad(loss, current, opts).grads, lr);
  }
  return current;
}

ParamSet grad_through_update(const ParamSet& theta, const LossFn& inner_loss, const LossFn& outer_loss, double lr,
                             OuterGradMode mode) {
  Tape tape;
  const auto bound = VarParams::bind(tape, theta);
  const auto adapted = inner_update(bound, inner_loss, lr, 1, mode);
  return grad(outer_loss(adapted), bound).grads.values();
}

}  // namespace memiml::numgrad
