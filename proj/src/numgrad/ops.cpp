#include "memiml/numgrad/ops.hpp"

#include <algorithm>
#include <cmath>

namespace memiml::numgrad {

namespace {

void require_same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw std::logic_error("op on an unbound Var");
  if (a.tape() != b.tape()) throw std::logic_error("operands live on different tapes");
}

void require_matching(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

Var finish(Tape& tape, Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
  require_finite(value, op);
  return tape.record(std::move(value), std::move(inputs), std::move(backward));
}

// Reshapes a gradient to the shape of the operand it belongs to.
Var fit(const Var& g, const Shape& shape) { return g.shape() == shape ? g : reshape(g, shape); }

Var constant_like(const Var& anchor, Tensor value) { return anchor.tape()->constant(std::move(value)); }

}  // namespace

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      if (s == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
  return Tensor::matrix(m, n, std::move(out));
}

Tensor transpose(const Tensor& a) {
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.at(i, j);
  }
  return Tensor::matrix(n, m, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_matching(a, b, "add");
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return Tensor(a.shape(), std::move(out));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_matching(a, b, "sub");
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return Tensor(a.shape(), std::move(out));
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const auto m = a.rows(), n = a.cols();
  if (bias.size() != n) {
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not fit " + to_string(a.shape()));
  }
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias[j];
  }
  return Tensor(a.shape(), std::move(out));
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (auto& v : out) v *= c;
  return Tensor(a.shape(), std::move(out));
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.values());
  for (auto& v : out) v = std::tanh(v);
  return Tensor(a.shape(), std::move(out));
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor(a.shape(), std::move(out));
}

Tensor softmax(const Tensor& a) {
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < m; ++i) {
    double* r = out.data() + i * n;
    const double mx = *std::max_element(r, r + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = std::exp(r[j] - mx);
      total += r[j];
    }
    for (std::size_t j = 0; j < n; ++j) r[j] /= total;
  }
  return Tensor(a.shape(), std::move(out));
}

double squared_l2(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

}  // namespace kernels

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  return finish(*a.tape(), kernels::matmul(a.value(), b.value()), {a, b},
                [a, b](const Var& g, const Var&) -> std::vector<Var> {
                  Var ga, gb;
                  if (a.requires_grad()) ga = fit(matmul(g, transpose(b)), a.shape());
                  if (b.requires_grad()) gb = fit(matmul(transpose(a), g), b.shape());
                  return {ga, gb};
                },
                "matmul");
}

Var transpose(const Var& a) {
  return finish(*a.tape(), kernels::transpose(a.value()), {a},
                [a](const Var& g, const Var&) -> std::vector<Var> { return {fit(transpose(g), a.shape())}; },
                "transpose");
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  return finish(*a.tape(), kernels::add(a.value(), b.value()), {a, b},
                [a, b](const Var& g, const Var&) -> std::vector<Var> {
                  return {fit(g, a.shape()), fit(g, b.shape())};
                },
                "add");
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  return finish(*a.tape(), kernels::sub(a.value(), b.value()), {a, b},
                [a, b](const Var& g, const Var&) -> std::vector<Var> {
                  Var gb;
                  if (b.requires_grad()) gb = fit(scale(g, -1.0), b.shape());
                  return {fit(g, a.shape()), gb};
                },
                "sub");
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out;
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    std::vector<double> d(av.values());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= bv[i];
    out = Tensor(av.shape(), std::move(d));
  } else if (bv.size() == 1) {
    out = kernels::scale(av, bv[0]);
  } else if (av.size() == 1) {
    out = kernels::scale(bv, av[0]);
  } else {
    throw ShapeError("mul: shape mismatch " + to_string(av.shape()) + " vs " + to_string(bv.shape()));
  }
  const bool a_broadcast = av.size() == 1 && bv.size() != 1;
  const bool b_broadcast = bv.size() == 1 && av.size() != 1;
  return finish(*a.tape(), std::move(out), {a, b},
                [a, b, a_broadcast, b_broadcast](const Var& g, const Var&) -> std::vector<Var> {
                  Var ga, gb;
                  if (a.requires_grad()) {
                    ga = a_broadcast ? fit(sum_all(mul(g, b)), a.shape()) : fit(mul(g, b), a.shape());
                  }
                  if (b.requires_grad()) {
                    gb = b_broadcast ? fit(sum_all(mul(g, a)), b.shape()) : fit(mul(g, a), b.shape());
                  }
                  return {ga, gb};
                },
                "mul");
}

Var add_bias(const Var& a, const Var& bias) {
  require_same_tape(a, bias);
  const auto rows = a.value().rows();
  return finish(*a.tape(), kernels::add_bias(a.value(), bias.value()), {a, bias},
                [a, bias, rows](const Var& g, const Var&) -> std::vector<Var> {
                  Var gb;
                  if (bias.requires_grad()) gb = fit(rows == 1 ? g : sum_rows(g), bias.shape());
                  return {fit(g, a.shape()), gb};
                },
                "add_bias");
}

Var scale(const Var& a, double c) {
  return finish(*a.tape(), kernels::scale(a.value(), c), {a},
                [c](const Var& g, const Var&) -> std::vector<Var> { return {scale(g, c)}; }, "scale");
}

Var tanh(const Var& a) {
  return finish(*a.tape(), kernels::tanh(a.value()), {a},
                [](const Var& g, const Var& y) -> std::vector<Var> {
                  const Var one = constant_like(y, Tensor::filled(y.shape(), 1.0));
                  return {mul(g, sub(one, mul(y, y)))};
                },
                "tanh");
}

Var relu(const Var& a) {
  return finish(*a.tape(), kernels::relu(a.value()), {a},
                [a](const Var& g, const Var&) -> std::vector<Var> {
                  std::vector<double> mask(a.value().values());
                  for (auto& v : mask) v = v > 0.0 ? 1.0 : 0.0;
                  return {mul(g, constant_like(a, Tensor(a.shape(), std::move(mask))))};
                },
                "relu");
}

Var log(const Var& a) {
  std::vector<double> out(a.value().values());
  for (auto& v : out) {
    if (v <= 0.0) throw NonFiniteError("log of a non-positive value");
    v = std::log(v);
  }
  return finish(*a.tape(), Tensor(a.shape(), std::move(out)), {a},
                [a](const Var& g, const Var&) -> std::vector<Var> { return {mul(g, reciprocal(a))}; }, "log");
}

Var reciprocal(const Var& a) {
  std::vector<double> out(a.value().values());
  for (auto& v : out) v = 1.0 / v;
  return finish(*a.tape(), Tensor(a.shape(), std::move(out)), {a},
                [](const Var& g, const Var& r) -> std::vector<Var> { return {mul(g, scale(mul(r, r), -1.0))}; },
                "reciprocal");
}

Var softmax(const Var& a) {
  return finish(*a.tape(), kernels::softmax(a.value()), {a},
                [](const Var& g, const Var& y) -> std::vector<Var> {
                  // dz = y * (g - rowsum(g * y)), the row sum spread by a ones matrix
                  const auto n = y.value().cols();
                  const Var ones = constant_like(y, Tensor::filled({n, n}, 1.0));
                  const Var row_dot = fit(matmul(mul(g, y), ones), y.shape());
                  return {mul(y, sub(g, row_dot))};
                },
                "softmax");
}

Var reshape(const Var& a, Shape shape) {
  const Shape original = a.shape();
  return finish(*a.tape(), a.value().reshaped(std::move(shape)), {a},
                [original](const Var& g, const Var&) -> std::vector<Var> { return {reshape(g, original)}; },
                "reshape");
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return finish(*a.tape(), Tensor::scalar(s), {a},
                [a](const Var& g, const Var&) -> std::vector<Var> {
                  return {mul(constant_like(a, Tensor::filled(a.shape(), 1.0)), g)};
                },
                "sum_all");
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_rows(const Var& a) {
  const auto m = a.value().rows(), n = a.value().cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += a.value().at(i, j);
  }
  return finish(*a.tape(), Tensor::matrix(1, n, std::move(out)), {a},
                [a, m](const Var& g, const Var&) -> std::vector<Var> {
                  return {fit(broadcast_rows(g, m), a.shape())};
                },
                "sum_rows");
}

Var broadcast_rows(const Var& a, std::size_t rows) {
  const Tensor& v = a.value();
  if (v.rows() != 1) throw ShapeError("broadcast_rows needs a single row, got " + to_string(v.shape()));
  const auto n = v.cols();
  std::vector<double> out;
  out.reserve(rows * n);
  for (std::size_t i = 0; i < rows; ++i) out.insert(out.end(), v.values().begin(), v.values().end());
  return finish(*a.tape(), Tensor::matrix(rows, n, std::move(out)), {a},
                [a](const Var& g, const Var&) -> std::vector<Var> { return {fit(sum_rows(g), a.shape())}; },
                "broadcast_rows");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols on no operands");
  const auto m = parts.front().value().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.value().rows() != m) throw ShapeError("concat_cols: row counts differ");
    total += p.value().cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(v.values().begin() + static_cast<std::ptrdiff_t>(i * v.cols()), v.cols(),
                  out.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    }
    offsets.push_back(offset);
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return finish(*parts.front().tape(), Tensor::matrix(m, total, std::move(out)), inputs,
                [inputs, offsets](const Var& g, const Var&) -> std::vector<Var> {
                  std::vector<Var> grads(inputs.size());
                  for (std::size_t k = 0; k < inputs.size(); ++k) {
                    if (!inputs[k].requires_grad()) continue;
                    grads[k] = fit(slice_cols(g, offsets[k], inputs[k].value().cols()), inputs[k].shape());
                  }
                  return grads;
                },
                "concat_cols");
}

Var concat_cols(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat_cols(parts);
}

Var slice_cols(const Var& a, std::size_t start, std::size_t width) {
  const Tensor& v = a.value();
  const auto m = v.rows(), n = v.cols();
  if (width == 0 || start + width > n) throw ShapeError("slice_cols out of range");
  std::vector<double> out(m * width);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(v.values().begin() + static_cast<std::ptrdiff_t>(i * n + start), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return finish(*a.tape(), Tensor::matrix(m, width, std::move(out)), {a},
                [a, start, width, m, n](const Var& g, const Var&) -> std::vector<Var> {
                  std::vector<Var> pieces;
                  if (start > 0) pieces.push_back(constant_like(a, Tensor::zeros({m, start})));
                  pieces.push_back(g);
                  if (start + width < n) pieces.push_back(constant_like(a, Tensor::zeros({m, n - start - width})));
                  return {fit(pieces.size() == 1 ? g : concat_cols(pieces), a.shape())};
                },
                "slice_cols");
}

Var softmax_cross_entropy(const Var& logits, const Var& targets) {
  require_same_tape(logits, targets);
  const Tensor& z = logits.value();
  const Tensor& t = targets.value();
  require_matching(z, t, "softmax_cross_entropy");
  const auto m = z.rows(), n = z.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double mx = z.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, z.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(z.at(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) total -= t.at(i, j) * (z.at(i, j) - lse);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  return finish(*logits.tape(), Tensor::scalar(total * inv_m), {logits, targets},
                [logits, targets, inv_m](const Var& g, const Var&) -> std::vector<Var> {
                  Var gz, gt;
                  const Var p = softmax(logits);
                  if (logits.requires_grad()) {
                    // (rowsum(t) * p - t) / m; rowsum(t) is 1 for probability targets
                    const auto n = p.value().cols();
                    const Var ones = constant_like(p, Tensor::filled({n, n}, 1.0));
                    const Var mass = fit(matmul(targets, ones), p.shape());
                    gz = mul(scale(sub(mul(mass, p), fit(targets, p.shape())), inv_m), g);
                  }
                  if (targets.requires_grad()) gt = fit(mul(scale(log(p), -inv_m), g), targets.shape());
                  return {gz, gt};
                },
                "softmax_cross_entropy");
}

Var cross_entropy(const Var& probs, const Var& targets) {
  require_same_tape(probs, targets);
  const Tensor& p = probs.value();
  const Tensor& t = targets.value();
  require_matching(p, t, "cross_entropy");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (t[i] == 0.0) continue;
    if (p[i] <= 0.0) throw NonFiniteError("cross_entropy: zero probability on a target class");
    total -= t[i] * std::log(p[i]);
  }
  const double inv_m = 1.0 / static_cast<double>(p.rows());
  return finish(*probs.tape(), Tensor::scalar(total * inv_m), {probs, targets},
                [probs, targets, inv_m](const Var& g, const Var&) -> std::vector<Var> {
                  Var gp, gt;
                  if (probs.requires_grad()) gp = mul(scale(mul(targets, reciprocal(probs)), -inv_m), g);
                  if (targets.requires_grad()) gt = fit(mul(scale(log(probs), -inv_m), g), targets.shape());
                  return {gp, gt};
                },
                "cross_entropy");
}

Var mse(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor diff = kernels::sub(a.value(), b.value());
  const double n = static_cast<double>(diff.size());
  return finish(*a.tape(), Tensor::scalar(kernels::squared_l2(diff) / n), {a, b},
                [a, b, n](const Var& g, const Var&) -> std::vector<Var> {
                  const Var d = sub(a, b);
                  Var ga, gb;
                  if (a.requires_grad()) ga = mul(scale(d, 2.0 / n), g);
                  if (b.requires_grad()) gb = fit(mul(scale(d, -2.0 / n), g), b.shape());
                  return {ga, gb};
                },
                "mse");
}

Var squared_l2(const Var& a) {
  return finish(*a.tape(), Tensor::scalar(kernels::squared_l2(a.value())), {a},
                [a](const Var& g, const Var&) -> std::vector<Var> { return {mul(scale(a, 2.0), g)}; },
                "squared_l2");
}

}  // namespace memiml::numgrad
