#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "memiml/numgrad/bilevel.hpp"
#include "memiml/numgrad/mlp.hpp"
#include "memiml/numgrad/ops.hpp"
#include "support/finite_diff.hpp"

using namespace memiml::numgrad;
using memiml::testing::central_difference;
using memiml::testing::max_rel_violation;
using memiml::testing::random_tensor;

namespace {

enum class Domain { any, positive, away_from_zero };

struct OpCase {
  std::string name;
  std::vector<Shape> shapes;
  Domain domain;
  std::function<Var(const std::vector<Var>&)> build;
};

Tensor sample_input(const Shape& shape, Domain domain, std::mt19937_64& rng) {
  switch (domain) {
    case Domain::positive:
      return random_tensor(shape, rng, 0.5, 2.0);
    case Domain::away_from_zero: {
      auto t = random_tensor(shape, rng, 0.1, 1.0);
      std::bernoulli_distribution flip(0.5);
      for (auto& v : t.data()) v = flip(rng) ? -v : v;
      return t;
    }
    case Domain::any:
      break;
  }
  return random_tensor(shape, rng);
}

std::vector<OpCase> primitive_cases() {
  return {
      {"matmul", {{2, 3}, {3, 4}}, Domain::any, [](auto& in) { return matmul(in[0], in[1]); }},
      {"transpose", {{2, 3}}, Domain::any, [](auto& in) { return transpose(in[0]); }},
      {"add", {{3, 2}, {3, 2}}, Domain::any, [](auto& in) { return add(in[0], in[1]); }},
      {"sub", {{3, 2}, {3, 2}}, Domain::any, [](auto& in) { return sub(in[0], in[1]); }},
      {"mul", {{3, 2}, {3, 2}}, Domain::any, [](auto& in) { return mul(in[0], in[1]); }},
      {"mul_broadcast", {{3, 2}, {1, 1}}, Domain::any, [](auto& in) { return mul(in[0], in[1]); }},
      {"add_bias", {{4, 3}, {3}}, Domain::any, [](auto& in) { return add_bias(in[0], in[1]); }},
      {"scale", {{2, 2}}, Domain::any, [](auto& in) { return scale(in[0], -1.7); }},
      {"tanh", {{3, 3}}, Domain::any, [](auto& in) { return tanh(in[0]); }},
      {"relu", {{3, 3}}, Domain::away_from_zero, [](auto& in) { return relu(in[0]); }},
      {"log", {{2, 3}}, Domain::positive, [](auto& in) { return log(in[0]); }},
      {"reciprocal", {{2, 3}}, Domain::positive, [](auto& in) { return reciprocal(in[0]); }},
      {"softmax", {{3, 4}}, Domain::any, [](auto& in) { return softmax(in[0]); }},
      {"reshape", {{2, 3}}, Domain::any, [](auto& in) { return reshape(in[0], {3, 2}); }},
      {"sum_all", {{2, 3}}, Domain::any, [](auto& in) { return sum_all(in[0]); }},
      {"mean_all", {{2, 3}}, Domain::any, [](auto& in) { return mean_all(in[0]); }},
      {"sum_rows", {{4, 3}}, Domain::any, [](auto& in) { return sum_rows(in[0]); }},
      {"broadcast_rows", {{1, 3}}, Domain::any, [](auto& in) { return broadcast_rows(in[0], 4); }},
      {"concat_cols", {{2, 3}, {2, 2}}, Domain::any, [](auto& in) { return concat_cols(in[0], in[1]); }},
      {"slice_cols", {{2, 5}}, Domain::any, [](auto& in) { return slice_cols(in[0], 1, 3); }},
      {"softmax_cross_entropy", {{3, 4}, {3, 4}}, Domain::any,
       [](auto& in) { return softmax_cross_entropy(in[0], in[1]); }},
      {"cross_entropy", {{3, 4}, {3, 4}}, Domain::positive, [](auto& in) { return cross_entropy(in[0], in[1]); }},
      {"mse", {{3, 2}, {3, 2}}, Domain::any, [](auto& in) { return mse(in[0], in[1]); }},
      {"squared_l2", {{2, 3}}, Domain::any, [](auto& in) { return squared_l2(in[0]); }},
  };
}

// Scalarizes an op's output with fixed random weights so every output
// element contributes a distinct amount.
Var scalarize(const Var& out, const Tensor& weights) {
  return sum_all(mul(out, out.tape()->constant(weights)));
}

std::vector<Tensor> split(const std::vector<double>& flat, const std::vector<Tensor>& like) {
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (const auto& t : like) {
    out.emplace_back(t.shape(), std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                                                   flat.begin() + static_cast<std::ptrdiff_t>(offset + t.size())));
    offset += t.size();
  }
  return out;
}

std::vector<double> join(const std::vector<Tensor>& ts) {
  std::vector<double> flat;
  for (const auto& t : ts) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

double evaluate_case(const OpCase& c, const std::vector<Tensor>& inputs, const Tensor* weights) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  const Var out = c.build(vars);
  return weights ? scalarize(out, *weights).value().item() : out.value().item();
}

// Gradient of the scalarized op via the tape; optionally the gradient of
// <grad, direction> (a Hessian-vector product) when `direction` is given.
std::vector<double> tape_gradient(const OpCase& c, const std::vector<Tensor>& inputs, const Tensor& weights,
                                  const std::vector<Tensor>* direction = nullptr) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  const Var loss = scalarize(c.build(vars), weights);
  auto grads = tape.gradients(loss, vars, {.create_graph = direction != nullptr});
  if (direction) {
    Var inner;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      const Var term = sum_all(mul(grads[k], tape.constant((*direction)[k].reshaped(grads[k].shape()))));
      inner = inner.valid() ? add(inner, term) : term;
    }
    grads = tape.gradients(inner, vars);
  }
  std::vector<Tensor> values;
  for (const auto& g : grads) values.push_back(g.value());
  return join(values);
}

}  // namespace

TEST_CASE("forward: spec examples on small graphs") {
  SUBCASE("linear map w*x") {
    const Mlp linear("lin.", {{1, 1, Activation::identity, false}});
    ParamSet p;
    p.insert("lin.l0.w", Tensor::matrix(1, 1, {2.0}));
    CHECK(linear.evaluate(p, Tensor::matrix(1, 1, {3.0})).item() == 6.0);
  }
  SUBCASE("identity graph") {
    const Mlp identity("id.", {});
    const Tensor x = Tensor::matrix(2, 2, {1.5, -2.0, 0.25, 7.0});
    CHECK(identity.evaluate({}, x) == x);
  }
  SUBCASE("two-layer tanh net with zero parameters") {
    const Mlp net("n.", {{3, 5, Activation::tanh, true}, {5, 2, Activation::identity, true}});
    const Tensor out = net.evaluate(net.zeros(), Tensor::matrix(1, 3, {0.3, -1.0, 4.0}));
    for (double v : out.values()) CHECK(v == 0.0);
  }
  SUBCASE("shape mismatch") {
    const Mlp net("n.", {{3, 2, Activation::relu, true}});
    CHECK_THROWS_AS(net.evaluate(net.zeros(), Tensor::matrix(1, 2, {1.0, 2.0})), ShapeError);
    Tape tape;
    CHECK_THROWS_AS(matmul(tape.constant(Tensor::matrix(2, 3, std::vector<double>(6, 1.0))),
                           tape.constant(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)))),
                    ShapeError);
  }
  SUBCASE("non-finite output is an error") {
    Tape tape;
    const Var x = tape.constant(Tensor::matrix(1, 2, {1e300, 1e300}));
    CHECK_THROWS_AS(mul(x, x), NonFiniteError);
    CHECK_THROWS_AS(tape.constant(Tensor::scalar(std::nan(""))), NonFiniteError);
  }
}

TEST_CASE("grad: analytic examples") {
  SUBCASE("(w - 2)^2 at w = 0") {
    Tape tape;
    ParamSet p;
    p.insert("w", Tensor::scalar(0.0));
    const auto bound = VarParams::bind(tape, p);
    const Var loss = mse(bound.at("w"), tape.constant(Tensor::scalar(2.0)));
    CHECK(grad(loss, bound).grads.at("w").value().item() == doctest::Approx(-4.0).epsilon(1e-15));
  }
  SUBCASE("sum of params gives all ones") {
    Tape tape;
    ParamSet p;
    p.insert("a", Tensor::matrix(2, 2, {1, 2, 3, 4}));
    p.insert("b", Tensor::row({-1, 5, 0.5}));
    const auto bound = VarParams::bind(tape, p);
    const Var loss = add(sum_all(bound.at("a")), sum_all(bound.at("b")));
    const auto g = grad(loss, bound).grads.values();
    CHECK(g.congruent(p));
    for (const auto& [name, t] : g) {
      for (double v : t.values()) CHECK(v == 1.0);
    }
  }
  SUBCASE("unreachable parameter yields zeros and a diagnostic") {
    Tape tape;
    ParamSet p;
    p.insert("used", Tensor::scalar(1.5));
    p.insert("unused", Tensor::row({1.0, 2.0}));
    const auto bound = VarParams::bind(tape, p);
    const auto result = grad(squared_l2(bound.at("used")), bound);
    CHECK(result.grads.at("used").value().item() == 3.0);
    CHECK(result.grads.at("unused").value() == Tensor::zeros({2}));
    REQUIRE(result.unreachable.size() == 1);
    CHECK(result.unreachable[0] == "unused");
    CHECK(!tape.diagnostics().empty());
  }
  SUBCASE("loss must be scalar") {
    Tape tape;
    const Var x = tape.leaf(Tensor::row({1.0, 2.0}));
    const Var xs[] = {x};
    CHECK_THROWS_AS(tape.gradients(x, xs), ShapeError);
  }
}

TEST_CASE("every primitive matches central differences (100 random cases each)") {
  std::mt19937_64 rng(20240611);
  for (const auto& c : primitive_cases()) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& s : c.shapes) inputs.push_back(sample_input(s, c.domain, rng));
      Tensor weights;
      {
        Tape probe;
        std::vector<Var> vars;
        for (const auto& t : inputs) vars.push_back(probe.constant(t));
        weights = random_tensor(c.build(vars).shape(), rng);
      }
      auto f = [&](const std::vector<double>& flat) { return evaluate_case(c, split(flat, inputs), &weights); };
      const auto numeric = central_difference(f, join(inputs));
      const auto analytic = tape_gradient(c, inputs, weights);
      CHECK(max_rel_violation(analytic, numeric) <= 1.0);
    }
  }
}

TEST_CASE("every primitive has correct second derivatives (Hessian-vector products)") {
  std::mt19937_64 rng(77);
  for (const auto& c : primitive_cases()) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Tensor> inputs, direction;
      for (const auto& s : c.shapes) {
        inputs.push_back(sample_input(s, c.domain, rng));
        direction.push_back(random_tensor(s, rng));
      }
      Tensor weights;
      {
        Tape probe;
        std::vector<Var> vars;
        for (const auto& t : inputs) vars.push_back(probe.constant(t));
        weights = random_tensor(c.build(vars).shape(), rng);
      }
      const auto dir = join(direction);
      // directional derivative of the (already verified) first-order gradient
      auto f = [&](const std::vector<double>& flat) {
        const auto g = tape_gradient(c, split(flat, inputs), weights);
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * dir[i];
        return s;
      };
      const auto numeric = central_difference(f, join(inputs));
      const auto analytic = tape_gradient(c, inputs, weights, &direction);
      CHECK(max_rel_violation(analytic, numeric, 1e-4, 1e-6) <= 1.0);
    }
  }
}

TEST_CASE("grad_through_update: scalar bilevel example") {
  // f(x) = theta * x; support (1, 2); query (1, 1); squared loss
  ParamSet theta;
  theta.insert("t", Tensor::matrix(1, 1, {0.0}));
  auto loss_on = [](double x, double y) {
    return [x, y](const VarParams& p) {
      Tape& tape = *p.at("t").tape();
      return mse(matmul(tape.constant(Tensor::matrix(1, 1, {x})), p.at("t")), tape.constant(Tensor::matrix(1, 1, {y})));
    };
  };
  const double alpha = 0.1;
  const auto second = grad_through_update(theta, loss_on(1, 2), loss_on(1, 1), alpha, OuterGradMode::second_order);
  const auto first = grad_through_update(theta, loss_on(1, 2), loss_on(1, 1), alpha, OuterGradMode::first_order);
  CHECK(std::abs(second.at("t").item() - (-0.96)) <= 1e-12);
  CHECK(std::abs(first.at("t").item() - (-1.2)) <= 1e-12);

  SUBCASE("alpha = 0 makes both modes equal the plain gradient") {
    const auto s0 = grad_through_update(theta, loss_on(1, 2), loss_on(1, 1), 0.0, OuterGradMode::second_order);
    const auto f0 = grad_through_update(theta, loss_on(1, 2), loss_on(1, 1), 0.0, OuterGradMode::first_order);
    CHECK(s0 == f0);
    CHECK(s0.at("t").item() == -2.0);
  }
}

TEST_CASE("grad_through_update matches finite differences through an MLP inner step") {
  std::mt19937_64 rng(5);
  const Mlp net("m.", {{3, 4, Activation::tanh, true}, {4, 2, Activation::identity, true}});
  for (int trial = 0; trial < 10; ++trial) {
    const ParamSet theta = net.init(rng);
    const Tensor xs = random_tensor({4, 3}, rng), ys = random_tensor({4, 2}, rng);
    const Tensor xq = random_tensor({5, 3}, rng), yq = random_tensor({5, 2}, rng);
    const double alpha = 0.3;
    auto loss_on = [&](const Tensor& x, const Tensor& y) {
      return [&net, x, y](const VarParams& p) {
        Tape& tape = *p.begin()->second.tape();
        return mse(net.forward(p, tape.constant(x)), tape.constant(y));
      };
    };
    auto outer_value = [&](const ParamSet& at) {
      // theta' via the tape's first-order gradient, then the query loss
      Tape tape;
      const auto bound = VarParams::bind(tape, at);
      const auto adapted = inner_update(bound, loss_on(xs, ys), alpha, 1, OuterGradMode::first_order);
      return loss_on(xq, yq)(adapted).value().item();
    };
    const auto numeric = central_difference(outer_value, theta);
    const auto analytic = grad_through_update(theta, loss_on(xs, ys), loss_on(xq, yq), alpha, OuterGradMode::second_order);
    CHECK(max_rel_violation(analytic.flatten(), numeric.flatten()) <= 1.0);
  }
}

TEST_CASE("tape replay is bit-identical") {
  auto run = [] {
    std::mt19937_64 rng(99);
    const Mlp net("m.", {{3, 6, Activation::relu, true}, {6, 3, Activation::tanh, true}});
    const ParamSet p = net.init(rng);
    const Tensor x = random_tensor({4, 3}, rng);
    Tape tape;
    const auto bound = VarParams::bind(tape, p);
    const Var loss = softmax_cross_entropy(net.forward(bound, tape.constant(x)),
                                           tape.constant(Tensor::matrix(4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0})));
    return grad(loss, bound, {.create_graph = true}).grads.values().flatten();
  };
  CHECK(run() == run());
}

TEST_CASE("ParamSet arithmetic requires congruence") {
  ParamSet a, b, c;
  a.insert("x", Tensor::row({1.0, 2.0}));
  b.insert("x", Tensor::row({3.0, 5.0}));
  c.insert("y", Tensor::row({3.0, 5.0}));
  CHECK(a.congruent(b));
  CHECK_FALSE(a.congruent(c));
  CHECK(a.axpy(2.0, b).at("x") == Tensor::row({7.0, 12.0}));
  CHECK(a.l2_distance(b) == doctest::Approx(std::sqrt(13.0)));
  CHECK_THROWS_AS(a.axpy(1.0, c), ShapeError);
  CHECK_THROWS(a.insert("x", Tensor::scalar(0.0)));
}
