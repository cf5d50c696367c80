#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "memiml/numgrad/mlp.hpp"

namespace memiml::nets {

using numgrad::Mlp;
using numgrad::ParamSet;
using numgrad::Tensor;
using numgrad::Var;
using numgrad::VarParams;

enum class HeadKind { label_interpolation, vector_conditioning };
enum class ValueKind { label, vector };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view text);

// Frozen encoder producing memory keys: tanh(x W + b) with W, b ~ N(0, 1/input_dim).
class KeyNetwork {
 public:
  KeyNetwork(std::size_t input_dim, std::size_t key_dim, std::uint64_t seed);
  KeyNetwork(std::size_t input_dim, std::size_t key_dim, ParamSet frozen);

  std::size_t input_dim() const { return graph_.input_dim(); }
  std::size_t key_dim() const { return graph_.output_dim(); }
  const ParamSet& params() const { return params_; }

  // rows x input_dim (or a single rank-1 input) -> rows x key_dim
  Tensor encode(const Tensor& input) const;

 private:
  Mlp graph_;
  ParamSet params_;
};

struct BaseModelDims {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 32;
  // classes for the label head, target width for the vector head
  std::size_t output_dim = 0;
  // width of the conditioning value; vector head only
  std::size_t value_dim = 0;
};

// The meta-learned model f_theta. Label head: two relu layers and a linear
// classifier, softmax output. Vector head: the same two-layer encoder, its
// output concatenated with a conditioning value, then one linear layer.
class BaseModel {
 public:
  BaseModel(HeadKind kind, BaseModelDims dims);

  HeadKind head_kind() const { return kind_; }
  const BaseModelDims& dims() const { return dims_; }

  ParamSet init(std::mt19937_64& rng) const;
  ParamSet zeros() const;
  void check(const ParamSet& theta) const;

  // Label head: class probabilities. Vector head: target-space output.
  // `value` must be present exactly when the head is vector-conditioning.
  Var forward(const VarParams& theta, const Var& input, std::optional<Var> value = std::nullopt) const;
  // Pre-softmax scores of the label head.
  Var logits(const VarParams& theta, const Var& input) const;
  // Cross-entropy against one-hot targets (label) or mean squared error (vector).
  Var loss(const VarParams& theta, const Var& input, const Var& target, std::optional<Var> value = std::nullopt) const;

 private:
  Var encode(const VarParams& theta, const Var& input) const;

  HeadKind kind_;
  BaseModelDims dims_;
  Mlp encoder_;
  Mlp head_;
};

// Two-layer fully connected map from keys to values, g_omega.
class ValuePredictor {
 public:
  static ValuePredictor two_layer(std::size_t key_dim, std::size_t hidden_dim, std::size_t value_dim, ValueKind kind);
  // Single bias-free linear layer; used for analytically tractable checks.
  static ValuePredictor linear(std::size_t key_dim, std::size_t value_dim, ValueKind kind);

  ValueKind value_kind() const { return kind_; }
  std::size_t key_dim() const { return graph_.input_dim(); }
  std::size_t value_dim() const { return graph_.output_dim(); }
  const Mlp& graph() const { return graph_; }

  ParamSet init(std::mt19937_64& rng) const;
  ParamSet zeros() const { return graph_.zeros(); }

  // Label values come out as probability vectors.
  Var forward(const VarParams& omega, const Var& keys) const;
  // Reconstruction loss: cross-entropy for labels, mean squared error for vectors.
  Var reconstruction_loss(const VarParams& omega, const Var& keys, const Var& values) const;
  Tensor predict(const ParamSet& omega, const Tensor& keys) const;

 private:
  ValuePredictor(Mlp graph, ValueKind kind) : graph_(std::move(graph)), kind_(kind) {}

  Mlp graph_;
  ValueKind kind_;
};

}  // namespace memiml::nets
