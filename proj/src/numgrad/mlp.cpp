#include "memiml/numgrad/mlp.hpp"

#include <cmath>

#include "memiml/numgrad/ops.hpp"

namespace memiml::numgrad {

Mlp::Mlp(std::string prefix, std::vector<DenseLayer> layers) : prefix_(std::move(prefix)), layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].in == 0 || layers_[i].out == 0) throw ShapeError("dense layer with a zero dimension");
    if (i > 0 && layers_[i].in != layers_[i - 1].out) {
      throw ShapeError("dense layer " + std::to_string(i) + " input does not match previous output");
    }
  }
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }

std::string Mlp::weight_name(std::size_t layer) const { return prefix_ + "l" + std::to_string(layer) + ".w"; }
std::string Mlp::bias_name(std::size_t layer) const { return prefix_ + "l" + std::to_string(layer) + ".b"; }

ParamSet Mlp::init(std::mt19937_64& rng, double gain) const {
  ParamSet params;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(l.in)));
    std::vector<double> w(l.in * l.out);
    for (auto& v : w) v = dist(rng);
    params.insert(weight_name(i), Tensor::matrix(l.in, l.out, std::move(w)));
    if (l.bias) params.insert(bias_name(i), Tensor::zeros({l.out}));
  }
  return params;
}

ParamSet Mlp::zeros() const {
  ParamSet params;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    params.insert(weight_name(i), Tensor::zeros({l.in, l.out}));
    if (l.bias) params.insert(bias_name(i), Tensor::zeros({l.out}));
  }
  return params;
}

void Mlp::check(const ParamSet& params) const {
  if (!params.congruent(zeros())) throw ShapeError("parameter set does not match graph '" + prefix_ + "'");
}

Var activate(const Var& x, Activation act) {
  switch (act) {
    case Activation::tanh:
      return tanh(x);
    case Activation::relu:
      return relu(x);
    case Activation::identity:
      break;
  }
  return x;
}

Var Mlp::forward(const VarParams& params, const Var& input) const {
  if (!layers_.empty() && input.value().cols() != input_dim()) {
    throw ShapeError("graph '" + prefix_ + "' expects input width " + std::to_string(input_dim()) + ", got " +
                     to_string(input.shape()));
  }
  Var h = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = matmul(h, params.at(weight_name(i)));
    if (layers_[i].bias) h = add_bias(h, params.at(bias_name(i)));
    h = activate(h, layers_[i].activation);
  }
  return h;
}

Tensor Mlp::evaluate(const ParamSet& params, const Tensor& input) const {
  Tape tape;
  const auto bound = VarParams::bind(tape, params, false);
  return forward(bound, tape.constant(input)).value();
}

}  // namespace memiml::numgrad
