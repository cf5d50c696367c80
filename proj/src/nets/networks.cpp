#include "memiml/nets/networks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "memiml/numgrad/ops.hpp"

namespace memiml::nets {

using numgrad::Activation;
using numgrad::ShapeError;
using numgrad::Tape;

std::string_view to_string(HeadKind kind) {
  return kind == HeadKind::label_interpolation ? "label-interpolation" : "vector-conditioning";
}

HeadKind parse_head_kind(std::string_view text) {
  if (text == "label-interpolation" || text == "label") return HeadKind::label_interpolation;
  if (text == "vector-conditioning" || text == "vector") return HeadKind::vector_conditioning;
  throw std::invalid_argument("unknown head kind '" + std::string(text) + "'");
}

KeyNetwork::KeyNetwork(std::size_t input_dim, std::size_t key_dim, std::uint64_t seed)
    : graph_("key.", {{input_dim, key_dim, Activation::tanh, true}}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  std::vector<double> w(input_dim * key_dim), b(key_dim);
  for (auto& v : w) v = dist(rng);
  for (auto& v : b) v = dist(rng);
  params_.insert(graph_.weight_name(0), Tensor::matrix(input_dim, key_dim, std::move(w)));
  params_.insert(graph_.bias_name(0), Tensor({key_dim}, std::move(b)));
}

KeyNetwork::KeyNetwork(std::size_t input_dim, std::size_t key_dim, ParamSet frozen)
    : graph_("key.", {{input_dim, key_dim, Activation::tanh, true}}), params_(std::move(frozen)) {
  graph_.check(params_);
}

Tensor KeyNetwork::encode(const Tensor& input) const {
  const Tensor x = input.rank() == 1 ? input.reshaped({1, input.size()}) : input;
  if (x.cols() != input_dim()) {
    throw ShapeError("key network expects width " + std::to_string(input_dim()) + ", got " +
                     numgrad::to_string(input.shape()));
  }
  return graph_.evaluate(params_, x);
}

BaseModel::BaseModel(HeadKind kind, BaseModelDims dims) : kind_(kind), dims_(dims) {
  if (dims.input_dim == 0 || dims.hidden_dim == 0 || dims.output_dim == 0) {
    throw ShapeError("base model dimensions must be positive");
  }
  encoder_ = Mlp("enc.", {{dims.input_dim, dims.hidden_dim, Activation::relu, true},
                          {dims.hidden_dim, dims.hidden_dim, Activation::relu, true}});
  if (kind == HeadKind::label_interpolation) {
    head_ = Mlp("cls.", {{dims.hidden_dim, dims.output_dim, Activation::identity, true}});
  } else {
    if (dims.value_dim == 0) throw ShapeError("vector head needs a positive value_dim");
    head_ = Mlp("dec.", {{dims.hidden_dim + dims.value_dim, dims.output_dim, Activation::identity, true}});
  }
}

ParamSet BaseModel::init(std::mt19937_64& rng) const {
  ParamSet theta = encoder_.init(rng, std::sqrt(2.0));
  for (const auto& [name, t] : head_.init(rng)) theta.insert(name, t);
  return theta;
}

ParamSet BaseModel::zeros() const {
  ParamSet theta = encoder_.zeros();
  for (const auto& [name, t] : head_.zeros()) theta.insert(name, t);
  return theta;
}

void BaseModel::check(const ParamSet& theta) const {
  if (!theta.congruent(zeros())) throw ShapeError("parameters do not match the base model");
}

Var BaseModel::encode(const VarParams& theta, const Var& input) const { return encoder_.forward(theta, input); }

Var BaseModel::logits(const VarParams& theta, const Var& input) const {
  if (kind_ != HeadKind::label_interpolation) throw std::logic_error("logits() is only defined for the label head");
  return head_.forward(theta, encode(theta, input));
}

Var BaseModel::forward(const VarParams& theta, const Var& input, std::optional<Var> value) const {
  if (kind_ == HeadKind::label_interpolation) {
    if (value) throw std::invalid_argument("label head takes no conditioning value; interpolate the output instead");
    return numgrad::softmax(logits(theta, input));
  }
  if (!value) throw std::invalid_argument("vector head needs a conditioning value");
  const Var h = encode(theta, input);
  if (value->value().rows() != h.value().rows() || value->value().cols() != dims_.value_dim) {
    throw ShapeError("conditioning value " + numgrad::to_string(value->shape()) + " does not fit batch");
  }
  return head_.forward(theta, numgrad::concat_cols(h, *value));
}

Var BaseModel::loss(const VarParams& theta, const Var& input, const Var& target, std::optional<Var> value) const {
  if (kind_ == HeadKind::label_interpolation) {
    if (value) throw std::invalid_argument("label head takes no conditioning value");
    return numgrad::softmax_cross_entropy(logits(theta, input), target);
  }
  return numgrad::mse(forward(theta, input, value), target);
}

ValuePredictor ValuePredictor::two_layer(std::size_t key_dim, std::size_t hidden_dim, std::size_t value_dim,
                                         ValueKind kind) {
  return ValuePredictor(Mlp("vp.", {{key_dim, hidden_dim, Activation::tanh, true},
                                    {hidden_dim, value_dim, Activation::identity, true}}),
                        kind);
}

ValuePredictor ValuePredictor::linear(std::size_t key_dim, std::size_t value_dim, ValueKind kind) {
  return ValuePredictor(Mlp("vp.", {{key_dim, value_dim, Activation::identity, false}}), kind);
}

ParamSet ValuePredictor::init(std::mt19937_64& rng) const { return graph_.init(rng); }

Var ValuePredictor::forward(const VarParams& omega, const Var& keys) const {
  const Var raw = graph_.forward(omega, keys);
  return kind_ == ValueKind::label ? numgrad::softmax(raw) : raw;
}

Var ValuePredictor::reconstruction_loss(const VarParams& omega, const Var& keys, const Var& values) const {
  const Var raw = graph_.forward(omega, keys);
  return kind_ == ValueKind::label ? numgrad::softmax_cross_entropy(raw, values) : numgrad::mse(raw, values);
}

Tensor ValuePredictor::predict(const ParamSet& omega, const Tensor& keys) const {
  Tape tape;
  const auto bound = VarParams::bind(tape, omega, false);
  const Tensor k = keys.rank() == 1 ? keys.reshaped({1, keys.size()}) : keys;
  return forward(bound, tape.constant(k)).value();
}

}  // namespace memiml::nets
