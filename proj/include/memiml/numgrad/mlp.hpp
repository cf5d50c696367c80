#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "memiml/numgrad/param_set.hpp"

namespace memiml::numgrad {

enum class Activation { identity, tanh, relu };

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::identity;
  bool bias = true;
};

// Graph description for a stack of dense layers. Parameters are named
// "<prefix>l<i>.w" (in x out) and "<prefix>l<i>.b" (out). An empty stack is
// the identity graph.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  const std::string& prefix() const { return prefix_; }
  std::size_t input_dim() const;
  std::size_t output_dim() const;

  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;

  // Weights ~ N(0, gain^2 / fan_in), biases zero.
  ParamSet init(std::mt19937_64& rng, double gain = 1.0) const;
  ParamSet zeros() const;

  // Throws ShapeError unless `params` holds exactly this graph's parameters.
  void check(const ParamSet& params) const;

  // `input` is rows x input_dim; returns rows x output_dim.
  Var forward(const VarParams& params, const Var& input) const;
  // Convenience evaluation on a private tape.
  Tensor evaluate(const ParamSet& params, const Tensor& input) const;

 private:
  std::string prefix_;
  std::vector<DenseLayer> layers_;
};

Var activate(const Var& x, Activation act);

}  // namespace memiml::numgrad
