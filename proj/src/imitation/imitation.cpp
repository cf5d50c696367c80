#include "memiml/imitation/imitation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "memiml/numgrad/ops.hpp"

namespace memiml::imitation {

using numgrad::Tape;
using numgrad::Var;
using numgrad::VarParams;

namespace {

Tensor stack(std::span<const MemorySlot> slots, bool keys) {
  if (slots.empty()) throw std::invalid_argument("no memory slots given");
  std::vector<Tensor> rows;
  rows.reserve(slots.size());
  for (const auto& s : slots) rows.push_back(keys ? s.key : s.value);
  return numgrad::stack_rows(rows);
}

Var loc_loss(const ValuePredictor& vp, Tape& tape, const VarParams& w, const ParamSet& anchor, const Tensor& keys,
             const Tensor& values, double gamma) {
  Var loss = vp.reconstruction_loss(w, tape.constant(keys), tape.constant(values));
  if (gamma != 0.0) {
    for (const auto& [name, v] : w) {
      const Var d = numgrad::sub(v, tape.constant(anchor.at(name)));
      loss = numgrad::add(loss, numgrad::scale(numgrad::squared_l2(d), gamma));
    }
  }
  return loss;
}

}  // namespace

void validate(const LocalAdaptConfig& cfg) {
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) throw std::invalid_argument("gamma must be nonnegative");
  if (cfg.steps < 0) throw std::invalid_argument("local adaptation steps must be nonnegative");
  if (!(cfg.step_size > 0.0) || !std::isfinite(cfg.step_size)) {
    throw std::invalid_argument("local adaptation step size must be positive");
  }
}

Tensor stack_keys(std::span<const MemorySlot> slots) { return stack(slots, true); }
Tensor stack_values(std::span<const MemorySlot> slots) { return stack(slots, false); }

double reconstruction_loss(const ValuePredictor& vp, const ParamSet& omega, std::span<const MemorySlot> pairs) {
  Tape tape;
  const auto w = VarParams::bind(tape, omega, false);
  return vp.reconstruction_loss(w, tape.constant(stack_keys(pairs)), tape.constant(stack_values(pairs))).value().item();
}

GlobalStep global_step(const ValuePredictor& vp, const ParamSet& omega, std::span<const MemorySlot> pairs,
                       double step_size) {
  if (pairs.empty()) throw std::invalid_argument("global_step needs at least one key-value pair");
  vp.graph().check(omega);
  Tape tape;
  const auto w = VarParams::bind(tape, omega);
  const Var loss = vp.reconstruction_loss(w, tape.constant(stack_keys(pairs)), tape.constant(stack_values(pairs)));
  const auto g = numgrad::grad(loss, w);
  return {omega.axpy(-step_size, g.grads.values()), loss.value().item()};
}

double local_objective(const ValuePredictor& vp, const ParamSet& omega_tilde, const ParamSet& omega,
                       std::span<const MemorySlot> retrieved, double gamma) {
  Tape tape;
  const auto w = VarParams::bind(tape, omega_tilde, false);
  return loc_loss(vp, tape, w, omega, stack_keys(retrieved), stack_values(retrieved), gamma).value().item();
}

ParamSet local_adapt(const ValuePredictor& vp, const ParamSet& omega, std::span<const MemorySlot> retrieved,
                     const LocalAdaptConfig& cfg, std::vector<double>* trace) {
  validate(cfg);
  if (retrieved.empty()) throw std::invalid_argument("local_adapt needs at least one retrieved slot");
  const Tensor keys = stack_keys(retrieved), values = stack_values(retrieved);
  ParamSet current = omega;
  for (int step = 0; step <= cfg.steps; ++step) {
    const bool last = step == cfg.steps;
    if (last && !trace) break;
    Tape tape;
    const auto w = VarParams::bind(tape, current, !last);
    Var loss;
    try {
      loss = loc_loss(vp, tape, w, omega, keys, values, cfg.gamma);
    } catch (const numgrad::NonFiniteError& e) {
      throw numgrad::NonFiniteError("local adaptation step " + std::to_string(step) + ": " + e.what());
    }
    if (trace) trace->push_back(loss.value().item());
    if (last) break;
    const auto g = numgrad::grad(loss, w);
    current = current.axpy(-cfg.step_size, g.grads.values());
    for (const auto& [name, t] : current) {
      if (!t.all_finite()) {
        throw numgrad::NonFiniteError("local adaptation step " + std::to_string(step) + ": parameter '" + name +
                                      "' became non-finite");
      }
    }
  }
  return current;
}

Tensor imitate_from(const ValuePredictor& vp, const ParamSet& omega, const Tensor& query_key,
                    std::span<const MemorySlot> retrieved, const LocalAdaptConfig& cfg) {
  const ParamSet adapted = cfg.steps == 0 ? omega : local_adapt(vp, omega, retrieved, cfg);
  const Tensor out = vp.predict(adapted, query_key);
  return out.reshaped({out.size()});
}

Tensor imitate(const ValuePredictor& vp, const ParamSet& omega, const Tensor& query_key, const TaskMemory& mem,
               std::size_t n_neighbors, const LocalAdaptConfig& cfg) {
  const auto retrieved = mem.read(query_key, n_neighbors);
  return imitate_from(vp, omega, query_key, retrieved, cfg);
}

Tensor mean_value(std::span<const MemorySlot> retrieved) {
  if (retrieved.empty()) throw std::invalid_argument("mean of no retrieved values");
  std::vector<double> acc(retrieved.front().value.size(), 0.0);
  for (const auto& s : retrieved) {
    if (s.value.size() != acc.size()) throw numgrad::ShapeError("retrieved values differ in width");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s.value[i];
  }
  for (auto& v : acc) v /= static_cast<double>(retrieved.size());
  return Tensor::row(std::move(acc));
}

}  // namespace memiml::imitation
