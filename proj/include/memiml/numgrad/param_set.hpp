#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memiml/numgrad/tape.hpp"
#include "memiml/numgrad/tensor.hpp"

namespace memiml::numgrad {

// Ordered collection of named tensors. Two sets are congruent when they hold
// the same names, in the same order, with the same shapes; arithmetic is only
// defined between congruent sets.
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  ParamSet() = default;

  void insert(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t element_count() const;
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  const std::vector<Entry>& entries() const { return entries_; }

  bool congruent(const ParamSet& other) const;

  // this + alpha * other
  ParamSet axpy(double alpha, const ParamSet& other) const;
  ParamSet scaled(double c) const;
  double squared_distance(const ParamSet& other) const;
  double l2_distance(const ParamSet& other) const;
  double squared_norm() const;

  // Concatenation of all entries in order; the inverse needs a template set.
  std::vector<double> flatten() const;
  static ParamSet unflatten(const ParamSet& like, std::span<const double> flat);

  // Prefixes every name, e.g. "theta/".
  ParamSet prefixed(std::string_view prefix) const;
  // Entries whose name starts with `prefix`, with the prefix removed.
  ParamSet with_prefix(std::string_view prefix) const;

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.entries_ == b.entries_; }

 private:
  void require_congruent(const ParamSet& other, const char* op) const;

  std::vector<Entry> entries_;
};

// A ParamSet bound to a Tape as Vars.
class VarParams {
 public:
  using Entry = std::pair<std::string, Var>;

  static VarParams bind(Tape& tape, const ParamSet& params, bool requires_grad = true);

  void insert(std::string name, Var v);
  const Var& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::vector<Var> vars() const;

  ParamSet values() const;

 private:
  std::vector<Entry> entries_;
};

struct GradResult {
  VarParams grads;
  // names of parameters the loss does not reach (their gradient is zero)
  std::vector<std::string> unreachable;
};

// Gradient of a scalar loss with respect to every entry of `wrt`.
GradResult grad(const Var& loss, const VarParams& wrt, GradOptions opts = {});

// params - lr * grads, recorded on the tape.
VarParams sgd_step(const VarParams& params, const VarParams& grads, double lr);

}  // namespace memiml::numgrad
