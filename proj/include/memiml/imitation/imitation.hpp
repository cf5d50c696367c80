#pragma once

#include <span>
#include <vector>

#include "memiml/memory/task_memory.hpp"
#include "memiml/nets/networks.hpp"

namespace memiml::imitation {

using memory::MemorySlot;
using memory::TaskMemory;
using nets::ValuePredictor;
using numgrad::ParamSet;
using numgrad::Tensor;

struct LocalAdaptConfig {
  double gamma = 0.1;  // proximal weight
  int steps = 5;       // L; 0 returns omega unchanged
  double step_size = 0.1;
};

void validate(const LocalAdaptConfig& cfg);

// Keys and values of `slots` stacked into matrices (rows = slots).
Tensor stack_keys(std::span<const MemorySlot> slots);
Tensor stack_values(std::span<const MemorySlot> slots);

// Mean reconstruction loss of g_omega over the pairs.
double reconstruction_loss(const ValuePredictor& vp, const ParamSet& omega, std::span<const MemorySlot> pairs);

struct GlobalStep {
  ParamSet omega;
  double loss = 0.0;  // mean reconstruction loss before the step
};

// One SGD step of omega on the mean reconstruction loss of the pairs.
GlobalStep global_step(const ValuePredictor& vp, const ParamSet& omega, std::span<const MemorySlot> pairs,
                       double step_size);

// gamma * |omega_tilde - omega|^2 + mean reconstruction loss over `retrieved`.
double local_objective(const ValuePredictor& vp, const ParamSet& omega_tilde, const ParamSet& omega,
                       std::span<const MemorySlot> retrieved, double gamma);

// L plain gradient steps on the local objective starting from omega_tilde =
// omega. `omega` itself is never modified. If `trace` is given it receives
// the objective before every step and after the last one (steps + 1 values).
ParamSet local_adapt(const ValuePredictor& vp, const ParamSet& omega, std::span<const MemorySlot> retrieved,
                     const LocalAdaptConfig& cfg, std::vector<double>* trace = nullptr);

// Locally adapts on `retrieved` and predicts the value of `query_key`. The
// result is a plain tensor: whatever consumes it sees a constant, so no
// gradient reaches omega or the adaptation through it.
Tensor imitate_from(const ValuePredictor& vp, const ParamSet& omega, const Tensor& query_key,
                    std::span<const MemorySlot> retrieved, const LocalAdaptConfig& cfg);

// Reads the n nearest slots of `mem` and calls imitate_from.
Tensor imitate(const ValuePredictor& vp, const ParamSet& omega, const Tensor& query_key, const TaskMemory& mem,
               std::size_t n_neighbors, const LocalAdaptConfig& cfg);

// Arithmetic mean of the retrieved values (the "no value predictor" ablation).
Tensor mean_value(std::span<const MemorySlot> retrieved);

}  // namespace memiml::imitation
