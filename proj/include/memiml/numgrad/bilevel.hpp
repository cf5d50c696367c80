#pragma once

#include <functional>

#include "memiml/numgrad/param_set.hpp"

namespace memiml::numgrad {

enum class OuterGradMode { second_order, first_order };

const char* to_string(OuterGradMode mode);

using LossFn = std::function<Var(const VarParams&)>;

// Recorded inner gradient steps: params - lr * grad(inner_loss). In
// second-order mode the steps stay differentiable with respect to `params`;
// in first-order mode each step's gradient enters as a constant.
VarParams inner_update(const VarParams& params, const LossFn& inner_loss, double lr, int steps, OuterGradMode mode);

// d/dtheta outer_loss(theta') where theta' = theta - lr * grad inner_loss(theta),
// evaluated on a fresh tape.
ParamSet grad_through_update(const ParamSet& theta, const LossFn& inner_loss, const LossFn& outer_loss, double lr,
                             OuterGradMode mode);

}  // namespace memiml::numgrad
