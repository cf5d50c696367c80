#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "memiml/nets/checkpoint.hpp"
#include "memiml/nets/networks.hpp"
#include "memiml/numgrad/ops.hpp"
#include "support/finite_diff.hpp"

using namespace memiml::nets;
using memiml::numgrad::Shape;
using memiml::numgrad::ShapeError;
using memiml::numgrad::Tape;
using memiml::testing::central_difference;
using memiml::testing::max_rel_violation;
using memiml::testing::random_tensor;

TEST_CASE("encode_key") {
  const KeyNetwork net(4, 8, 11);
  const Tensor x = Tensor::row({0.3, -1.2, 0.8, 2.0});

  SUBCASE("frozen determinism") { CHECK(net.encode(x) == net.encode(x)); }

  SUBCASE("zero input through a zero-bias map gives a zero key") {
    ParamSet frozen = net.params();
    frozen.at("key.l0.b") = Tensor::zeros({8});
    const KeyNetwork zero_bias(4, 8, frozen);
    const Tensor key = zero_bias.encode(Tensor::zeros({4}));
    for (double v : key.values()) CHECK(v == 0.0);
  }

  SUBCASE("distinct inputs map to distinct keys") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      const Tensor a = random_tensor({4}, rng), b = random_tensor({4}, rng);
      CHECK(net.encode(a) != net.encode(b));
    }
  }

  SUBCASE("same seed, same network") { CHECK(KeyNetwork(4, 8, 11).params() == net.params()); }

  SUBCASE("shape mismatch") { CHECK_THROWS_AS(net.encode(Tensor::row({1.0, 2.0})), ShapeError); }

  SUBCASE("batch rows encode independently") {
    const Tensor batch = Tensor::matrix(2, 4, {0.3, -1.2, 0.8, 2.0, 1, 1, 1, 1});
    const Tensor keys = net.encode(batch);
    CHECK(keys.row_at(0) == net.encode(x).row_at(0));
  }
}

TEST_CASE("predict_value") {
  SUBCASE("zero parameters give a uniform distribution for labels") {
    const auto vp = ValuePredictor::two_layer(6, 64, 3, ValueKind::label);
    const Tensor out = vp.predict(vp.zeros(), Tensor::row({1, 2, 3, 4, 5, 6}));
    for (double v : out.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("scalar linear predictor") {
    const auto vp = ValuePredictor::linear(1, 1, ValueKind::vector);
    ParamSet omega;
    omega.insert("vp.l0.w", Tensor::matrix(1, 1, {1.0}));
    CHECK(vp.predict(omega, Tensor::row({3.0})).item() == 3.0);
  }
  SUBCASE("key width is checked") {
    const auto vp = ValuePredictor::two_layer(6, 8, 2, ValueKind::label);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(vp.predict(vp.init(rng), Tensor::row({1, 2})), ShapeError);
  }
}

TEST_CASE("base_forward") {
  std::mt19937_64 rng(8);

  SUBCASE("label head outputs distributions") {
    const BaseModel model(HeadKind::label_interpolation, {.input_dim = 4, .hidden_dim = 16, .output_dim = 3});
    const ParamSet theta = model.init(rng);
    Tape tape;
    const auto bound = VarParams::bind(tape, theta, false);
    const Tensor probs = model.forward(bound, tape.constant(random_tensor({10, 4}, rng, -3, 3))).value();
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < probs.cols(); ++c) {
        CHECK(probs.at(r, c) >= 0.0);
        s += probs.at(r, c);
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    CHECK_THROWS_AS(model.forward(bound, tape.constant(random_tensor({1, 4}, rng)), tape.constant(Tensor::row({1, 0, 0}))),
                    std::invalid_argument);
  }

  SUBCASE("vector head with a zero value equals the unconditioned sub-network") {
    const BaseModel model(HeadKind::vector_conditioning,
                          {.input_dim = 3, .hidden_dim = 8, .output_dim = 2, .value_dim = 5});
    ParamSet theta = model.init(rng);
    const Tensor x = random_tensor({4, 3}, rng);

    Tape tape;
    const auto bound = VarParams::bind(tape, theta, false);
    const Tensor conditioned = model.forward(bound, tape.constant(x), tape.constant(Tensor::zeros({4, 5}))).value();

    // unconditioned: encoder followed by the hidden block of the decoder only
    const auto& w = theta.at("dec.l0.w");
    std::vector<double> hidden_block(w.values().begin(), w.values().begin() + 8 * 2);
    const memiml::numgrad::Mlp sub("s.", {{8, 2, memiml::numgrad::Activation::identity, true}});
    ParamSet sub_params;
    sub_params.insert("s.l0.w", Tensor::matrix(8, 2, hidden_block));
    sub_params.insert("s.l0.b", theta.at("dec.l0.b"));
    const memiml::numgrad::Mlp enc("enc.", {{3, 8, memiml::numgrad::Activation::relu, true},
                                            {8, 8, memiml::numgrad::Activation::relu, true}});
    const Tensor unconditioned = sub.evaluate(sub_params, enc.evaluate(theta, x));
    for (std::size_t i = 0; i < conditioned.size(); ++i) {
      CHECK(conditioned[i] == doctest::Approx(unconditioned[i]).epsilon(1e-14));
    }

    // zeroing the value block makes the output independent of the value
    for (std::size_t i = 8 * 2; i < w.size(); ++i) theta.at("dec.l0.w")[i] = 0.0;
    Tape tape2;
    const auto b2 = VarParams::bind(tape2, theta, false);
    const Tensor with_zero = model.forward(b2, tape2.constant(x), tape2.constant(Tensor::zeros({4, 5}))).value();
    const Tensor with_random = model.forward(b2, tape2.constant(x), tape2.constant(random_tensor({4, 5}, rng))).value();
    CHECK(with_zero == with_random);
    CHECK_THROWS_AS(model.forward(b2, tape2.constant(x)), std::invalid_argument);
  }

  SUBCASE("deterministic for fixed seed and parameters") {
    const BaseModel model(HeadKind::label_interpolation, {.input_dim = 4, .hidden_dim = 16, .output_dim = 2});
    std::mt19937_64 a(42), b(42);
    const ParamSet ta = model.init(a), tb = model.init(b);
    CHECK(ta == tb);
    const Tensor x = Tensor::matrix(1, 4, {0.1, 0.2, 0.3, 0.4});
    Tape t1, t2;
    CHECK(model.forward(VarParams::bind(t1, ta, false), t1.constant(x)).value() ==
          model.forward(VarParams::bind(t2, tb, false), t2.constant(x)).value());
  }
}

// Zero-initialized biases put relu pre-activations exactly on the kink when
// a whole hidden layer is inactive; finite differences are one-sided there.
ParamSet jittered(const ParamSet& p, std::mt19937_64& rng) {
  std::vector<double> noise(p.element_count());
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto& v : noise) v = dist(rng);
  return p.axpy(1.0, ParamSet::unflatten(p, noise));
}

TEST_CASE("network gradients match finite differences") {
  std::mt19937_64 rng(2718);
  const BaseModel label(HeadKind::label_interpolation, {.input_dim = 4, .hidden_dim = 6, .output_dim = 2});
  const BaseModel vec(HeadKind::vector_conditioning, {.input_dim = 2, .hidden_dim = 5, .output_dim = 1, .value_dim = 3});
  const auto vp_label = ValuePredictor::two_layer(5, 7, 2, ValueKind::label);
  const auto vp_vec = ValuePredictor::two_layer(5, 7, 3, ValueKind::vector);

  for (int trial = 0; trial < 25; ++trial) {
    const Tensor x = random_tensor({5, 4}, rng, -2, 2);
    Tensor onehot = Tensor::zeros({5, 2});
    for (std::size_t r = 0; r < 5; ++r) onehot.at(r, rng() % 2) = 1.0;
    {
      const ParamSet theta = jittered(label.init(rng), rng);
      auto f = [&](const ParamSet& p) {
        Tape tape;
        return label.loss(VarParams::bind(tape, p, false), tape.constant(x), tape.constant(onehot)).value().item();
      };
      Tape tape;
      const auto bound = VarParams::bind(tape, theta);
      const auto g = grad(label.loss(bound, tape.constant(x), tape.constant(onehot)), bound).grads.values();
      CHECK(max_rel_violation(g.flatten(), central_difference(f, theta).flatten()) <= 1.0);
    }
    {
      const ParamSet theta = jittered(vec.init(rng), rng);
      const Tensor xv = random_tensor({5, 2}, rng), v = random_tensor({5, 3}, rng), y = random_tensor({5, 1}, rng);
      auto f = [&](const ParamSet& p) {
        Tape tape;
        return vec.loss(VarParams::bind(tape, p, false), tape.constant(xv), tape.constant(y), tape.constant(v))
            .value()
            .item();
      };
      Tape tape;
      const auto bound = VarParams::bind(tape, theta);
      const auto g =
          grad(vec.loss(bound, tape.constant(xv), tape.constant(y), tape.constant(v)), bound).grads.values();
      CHECK(max_rel_violation(g.flatten(), central_difference(f, theta).flatten()) <= 1.0);
    }
    for (const auto* vp : {&vp_label, &vp_vec}) {
      const ParamSet omega = vp->init(rng);
      const Tensor keys = random_tensor({4, 5}, rng);
      Tensor values = vp->value_kind() == ValueKind::label ? Tensor::zeros({4, 2}) : random_tensor({4, 3}, rng);
      if (vp->value_kind() == ValueKind::label) {
        for (std::size_t r = 0; r < 4; ++r) values.at(r, rng() % 2) = 1.0;
      }
      auto f = [&](const ParamSet& p) {
        Tape tape;
        return vp->reconstruction_loss(VarParams::bind(tape, p, false), tape.constant(keys), tape.constant(values))
            .value()
            .item();
      };
      Tape tape;
      const auto bound = VarParams::bind(tape, omega);
      const auto g = grad(vp->reconstruction_loss(bound, tape.constant(keys), tape.constant(values)), bound).grads.values();
      CHECK(max_rel_violation(g.flatten(), central_difference(f, omega).flatten()) <= 1.0);
    }
  }
}

TEST_CASE("checkpoint container") {
  const auto dir = std::filesystem::temp_directory_path() / "memiml_test_ckpt";
  std::filesystem::remove_all(dir);
  std::mt19937_64 rng(4);
  ParamSet params;
  params.insert("theta/enc.l0.w", random_tensor({3, 4}, rng));
  params.insert("omega/vp.l0.b", random_tensor({4}, rng));
  params.insert("tiny", Tensor::scalar(-0.0));
  const nlohmann::json meta = {{"seed", 7}, {"config", {{"beta", 0.2}}}};

  save_checkpoint(dir / "a.ckpt", params, meta);
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  CHECK(loaded.params == params);
  CHECK(loaded.meta == meta);

  SUBCASE("data section is little-endian doubles after the index") {
    std::ifstream in(dir / "a.ckpt", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    std::uint64_t index_len = 0;
    for (int i = 7; i >= 0; --i) index_len = (index_len << 8) | bytes[8 + i];
    CHECK(bytes.size() == 16 + index_len + 8 * params.element_count());
    std::uint64_t first = 0;
    for (int i = 7; i >= 0; --i) first = (first << 8) | bytes[16 + index_len + i];
    CHECK(std::bit_cast<double>(first) == params.at("theta/enc.l0.w")[0]);
  }

  SUBCASE("bad magic is rejected") {
    std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
  }
  std::filesystem::remove_all(dir);
}
