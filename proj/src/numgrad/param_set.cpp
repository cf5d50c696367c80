#include "memiml/numgrad/param_set.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memiml/numgrad/ops.hpp"

namespace memiml::numgrad {

void ParamSet::insert(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

const Tensor& ParamSet::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Tensor& ParamSet::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ParamSet::element_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

bool ParamSet::congruent(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (entries_[i].second.shape() != other.entries_[i].second.shape()) return false;
  }
  return true;
}

void ParamSet::require_congruent(const ParamSet& other, const char* op) const {
  if (!congruent(other)) throw ShapeError(std::string(op) + ": parameter sets are not congruent");
}

ParamSet ParamSet::axpy(double alpha, const ParamSet& other) const {
  require_congruent(other, "axpy");
  ParamSet out = *this;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = out.entries_[i].second.data();
    const auto src = other.entries_[i].second.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += alpha * src[k];
  }
  return out;
}

ParamSet ParamSet::scaled(double c) const {
  ParamSet out = *this;
  for (auto& e : out.entries_) {
    for (auto& v : e.second.data()) v *= c;
  }
  return out;
}

double ParamSet::squared_distance(const ParamSet& other) const {
  require_congruent(other, "distance");
  double s = 0.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto a = entries_[i].second.data();
    const auto b = other.entries_[i].second.data();
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  }
  return s;
}

double ParamSet::l2_distance(const ParamSet& other) const { return std::sqrt(squared_distance(other)); }

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += kernels::squared_l2(e.second);
  return s;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(element_count());
  for (const auto& e : entries_) flat.insert(flat.end(), e.second.values().begin(), e.second.values().end());
  return flat;
}

ParamSet ParamSet::unflatten(const ParamSet& like, std::span<const double> flat) {
  if (flat.size() != like.element_count()) throw ShapeError("unflatten: wrong number of values");
  ParamSet out;
  std::size_t offset = 0;
  for (const auto& [name, t] : like.entries_) {
    std::vector<double> data(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                             flat.begin() + static_cast<std::ptrdiff_t>(offset + t.size()));
    offset += t.size();
    out.insert(name, Tensor(t.shape(), std::move(data)));
  }
  return out;
}

ParamSet ParamSet::prefixed(std::string_view prefix) const {
  ParamSet out;
  for (const auto& [name, t] : entries_) out.insert(std::string(prefix) + name, t);
  return out;
}

ParamSet ParamSet::with_prefix(std::string_view prefix) const {
  ParamSet out;
  for (const auto& [name, t] : entries_) {
    if (name.starts_with(prefix)) out.insert(name.substr(prefix.size()), t);
  }
  return out;
}

VarParams VarParams::bind(Tape& tape, const ParamSet& params, bool requires_grad) {
  VarParams out;
  for (const auto& [name, t] : params) out.insert(name, requires_grad ? tape.leaf(t) : tape.constant(t));
  return out;
}

void VarParams::insert(std::string name, Var v) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), v);
}

const Var& VarParams::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

bool VarParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

std::vector<Var> VarParams::vars() const {
  std::vector<Var> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

ParamSet VarParams::values() const {
  ParamSet out;
  for (const auto& [name, v] : entries_) out.insert(name, v.value());
  return out;
}

GradResult grad(const Var& loss, const VarParams& wrt, GradOptions opts) {
  if (wrt.size() == 0) return {};
  Tape& tape = *loss.tape();
  const auto vars = wrt.vars();
  std::vector<std::size_t> missing;
  const auto grads = tape.gradients(loss, vars, opts, &missing);

  GradResult result;
  std::size_t k = 0;
  for (const auto& [name, v] : wrt) result.grads.insert(name, grads[k++]);
  for (auto index : missing) {
    const auto& name = (wrt.begin() + static_cast<std::ptrdiff_t>(index))->first;
    result.unreachable.push_back(name);
    tape.note("gradient: parameter '" + name + "' unreachable");
  }
  return result;
}

VarParams sgd_step(const VarParams& params, const VarParams& grads, double lr) {
  VarParams out;
  auto g = grads.begin();
  for (const auto& [name, v] : params) {
    if (g == grads.end() || g->first != name) throw ShapeError("sgd_step: gradient set does not match parameters");
    out.insert(name, lr == 0.0 ? v : sub(v, scale(g->second, lr)));
    ++g;
  }
  return out;
}

}  // namespace memiml::numgrad
