#pragma once

#include <memory>

#include "memiml/metalearn/config.hpp"
#include "memiml/numgrad/param_set.hpp"

namespace memiml::metalearn {

using numgrad::ParamSet;

// First-order update rule for the outer loop. State is exposed as a ParamSet
// so it can travel in checkpoints.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual OptimizerKind kind() const = 0;
  virtual ParamSet step(const ParamSet& params, const ParamSet& grads) = 0;
  virtual ParamSet state() const = 0;
  virtual void load_state(const ParamSet& state) = 0;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  OptimizerKind kind() const override { return OptimizerKind::sgd; }
  ParamSet step(const ParamSet& params, const ParamSet& grads) override;
  ParamSet state() const override { return {}; }
  void load_state(const ParamSet&) override {}

 private:
  double lr_;
};

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  OptimizerKind kind() const override { return OptimizerKind::adam; }
  ParamSet step(const ParamSet& params, const ParamSet& grads) override;
  // "m/<name>", "v/<name>" and a scalar "t"
  ParamSet state() const override;
  void load_state(const ParamSet& state) override;

 private:
  double lr_, b1_, b2_, eps_;
  ParamSet m_, v_;
  double t_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr);

}  // namespace memiml::metalearn
