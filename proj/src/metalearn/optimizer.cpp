#include "memiml/metalearn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace memiml::metalearn {

using numgrad::Tensor;

ParamSet Sgd::step(const ParamSet& params, const ParamSet& grads) { return params.axpy(-lr_, grads); }

ParamSet Adam::step(const ParamSet& params, const ParamSet& grads) {
  if (!params.congruent(grads)) throw numgrad::ShapeError("optimizer: gradients not congruent with parameters");
  if (m_.empty()) {
    m_ = params.scaled(0.0);
    v_ = params.scaled(0.0);
  }
  t_ += 1;
  const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
  ParamSet out;
  for (const auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    Tensor next = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      next[i] = p[i] - lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
    out.insert(name, std::move(next));
  }
  return out;
}

ParamSet Adam::state() const {
  ParamSet s;
  s.insert("t", Tensor::scalar(t_));
  for (const auto& [name, t] : m_) s.insert("m/" + name, t);
  for (const auto& [name, t] : v_) s.insert("v/" + name, t);
  return s;
}

void Adam::load_state(const ParamSet& state) {
  if (state.empty()) {
    m_ = {};
    v_ = {};
    t_ = 0;
    return;
  }
  t_ = state.at("t").item();
  m_ = state.with_prefix("m/");
  v_ = state.with_prefix("v/");
  if (!m_.congruent(v_)) throw std::invalid_argument("inconsistent Adam state");
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr) {
  if (kind == OptimizerKind::sgd) return std::make_unique<Sgd>(lr);
  return std::make_unique<Adam>(lr);
}

}  // namespace memiml::metalearn
