#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fofewsd/nn.hpp"
#include "fofewsd/random.hpp"

using namespace fofewsd;
using namespace fofewsd::nn;
using Catch::Approx;

namespace {

NetworkParams single_layer(Matrix w, Vector b) {
  NetworkParams p;
  p.layers.push_back({std::move(w), std::move(b)});
  return p;
}

Vector random_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

std::vector<std::size_t> random_dims(Rng& rng, std::size_t max_layers, std::size_t max_dim) {
  std::vector<std::size_t> dims(2 + rng.below(max_layers));
  for (auto& d : dims) d = 1 + rng.below(max_dim);
  if (dims.back() < 2) dims.back() = 2;
  return dims;
}

// init_network leaves biases at zero, which can park a unit exactly on the
// rectifier kink when the layer below is fully inactive. Random biases keep
// the network differentiable at the probe point.
NetworkParams random_network(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  auto p = init_network(dims, seed);
  Rng rng(seed + 1000);
  for (auto& l : p.layers)
    for (double& b : l.bias) b = rng.uniform(-0.5, 0.5);
  return p;
}

}  // namespace

TEST_CASE("init_network is seeded and fan-bounded", "[nn]") {
  const auto a = init_network({4, 3}, 42, 5, 2);
  const auto b = init_network({4, 3}, 42, 5, 2);
  CHECK(a == b);
  CHECK_FALSE(a == init_network({4, 3}, 43, 5, 2));

  const double bound = std::sqrt(6.0 / 7.0);
  CHECK(bound == Approx(0.9258200998));
  for (double w : a.layers[0].weight.values()) CHECK(std::abs(w) <= bound);
  for (double v : a.layers[0].bias) CHECK(v == 0.0);
  for (double e : a.embedding.values()) CHECK(std::abs(e) <= 0.05);
  CHECK(a.layer_dims() == std::vector<std::size_t>{4, 3});

  CHECK_THROWS_WITH(init_network({4}, 1), "need at least input and output");
  CHECK_THROWS_AS(init_network({4, 0}, 1), InvalidArgument);
}

TEST_CASE("forward applies rectifiers on hidden layers only", "[nn]") {
  SECTION("zero parameters give zero logits") {
    NetworkParams p = init_network({3, 4, 2}, 1).zeros_like();
    const auto t = forward(p, Vector{1, 2, 3});
    CHECK(t.logits() == Vector{0, 0});
    CHECK(t.activations.size() == p.layers.size() + 1);
  }
  SECTION("single affine layer") {
    const auto p = single_layer(Matrix::identity(2), Vector{0, 0});
    CHECK(forward(p, Vector{1, -2}).logits() == Vector{1, -2});
  }
  SECTION("hidden layer clamps") {
    auto p = single_layer(Matrix::identity(2), Vector{0, 0});
    p.layers.push_back({Matrix::identity(2), Vector{0, 0}});
    const auto t = forward(p, Vector{1, -2});
    CHECK(t.held_out() == Vector{1, 0});
    CHECK(t.pre_activations[0] == Vector{1, -2});
    CHECK(held_out_activation(p, Vector{1, -2}) == Vector{1, 0});
  }
  SECTION("dimension mismatch") {
    const auto p = init_network({3, 2}, 1);
    CHECK_THROWS_AS(forward(p, Vector{1, 2}), InvalidArgument);
  }
  SECTION("deterministic") {
    const auto p = init_network({5, 7, 3}, 9);
    const Vector x{0.1, -0.2, 0.3, 0.4, -0.5};
    const auto t1 = forward(p, x);
    const auto t2 = forward(p, x);
    CHECK(t1.activations == t2.activations);
    CHECK(t1.pre_activations == t2.pre_activations);
  }
}

TEST_CASE("softmax cross-entropy", "[nn]") {
  CHECK(loss_softmax_xent(Vector{0, 0, 0, 0}, 2) == Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(loss_softmax_xent(Vector{1000, 0}, 0) == Approx(0.0).margin(1e-12));
  CHECK(std::isfinite(loss_softmax_xent(Vector{1000, 0}, 1)));
  CHECK(loss_softmax_xent(Vector{1, 2}, 0) == Approx(std::log(1 + std::exp(1.0))).epsilon(1e-12));
  CHECK(loss_softmax_xent(Vector{1, 2}, 0) == Approx(1.3132616875));
  CHECK_THROWS_AS(loss_softmax_xent(Vector{1, 2}, 2), InvalidArgument);
}

TEST_CASE("softmax sums to one and is shift invariant", "[nn][property]") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vector x = random_vector(rng, 1 + rng.below(20));
    const double c = rng.uniform(-50, 50);
    Vector shifted = x;
    for (double& v : shifted) v += c;
    const Vector p = softmax(x);
    const Vector q = softmax(shifted);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - q[k]) <= 1e-12);
  }
}

TEST_CASE("backward gives softmax minus one-hot at the logits", "[nn]") {
  // Single identity layer: d(loss)/d(input) equals d(loss)/d(logits).
  const auto p = single_layer(Matrix::identity(3), Vector(3, 0.0));
  const Vector x{0.5, -1.0, 2.0};
  const auto g = backward(p, forward(p, x), 1);
  Vector expect = softmax(x);
  expect[1] -= 1.0;
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.input[i] == Approx(expect[i]).epsilon(1e-14));
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.params.layers[0].bias[i] == Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("zero input gives zero first-layer weight gradients", "[nn]") {
  const auto p = init_network({3, 4, 2}, 5);
  const auto g = backward(p, forward(p, Vector(3, 0.0)), 0);
  for (double v : g.params.layers[0].weight.values()) CHECK(v == 0.0);
  bool any_bias = false;
  for (double v : g.params.layers[1].bias) any_bias |= v != 0.0;
  CHECK(any_bias);
  CHECK_THROWS_AS(backward(init_network({3, 5, 2}, 5), forward(p, Vector(3, 0.0)), 0), InvalidArgument);
}

TEST_CASE("backward matches an independent central-difference loop", "[nn]") {
  Rng rng(17);
  const auto p = init_network({3, 4, 2}, 17);
  const Vector x = random_vector(rng, 3);
  const auto g = backward(p, forward(p, x), 1);
  const double h = 1e-5;
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    for (std::size_t i = 0; i < p.layers[l].weight.size(); ++i) {
      auto up = p, down = p;
      up.layers[l].weight.values()[i] += h;
      down.layers[l].weight.values()[i] -= h;
      const double numeric =
          (loss_softmax_xent(forward(up, x).logits(), 1) - loss_softmax_xent(forward(down, x).logits(), 1)) / (2 * h);
      CHECK(g.params.layers[l].weight.values()[i] == Approx(numeric).epsilon(1e-6).margin(1e-10));
    }
}

TEST_CASE("gradient_check on random tiny networks", "[nn][property]") {
  Rng rng(2024);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto dims = random_dims(rng, 3, 8);
    const auto p = random_network(dims, seed);
    const Vector x = random_vector(rng, dims.front());
    const std::size_t target = rng.below(dims.back());
    worst = std::max(worst, gradient_check(p, x, target, 1e-5));
  }
  CHECK(worst < 1e-6);

  const auto p = init_network({3, 4, 2}, 1);
  CHECK(gradient_check(p, Vector{0.3, -0.6, 0.9}, 0, 1e-5) < 1e-6);
}

TEST_CASE("gradient_check detects a scaled gradient", "[nn]") {
  const auto p = init_network({3, 4, 2}, 1);
  const GradientFn scaled = [](const NetworkParams& params, std::span<const double> x, std::size_t t) {
    auto g = analytic_gradient(params, x, t);
    for_each_tensor(
        [](std::span<double> s) {
          for (double& v : s) v *= 1.01;
        },
        g);
    return g;
  };
  CHECK(gradient_check(p, Vector{0.3, -0.6, 0.9}, 0, 1e-5, scaled) >= 1e-3);
}

TEST_CASE("gradient_check on a parameterless network is zero", "[nn]") {
  NetworkParams empty;
  CHECK(parameter_count(empty) == 0);
  CHECK(gradient_check(empty, Vector{0.1, 0.2}, 1, 1e-5) == 0.0);
  CHECK_THROWS_AS(gradient_check(empty, Vector{0.1}, 0, 0.0), InvalidArgument);
}

TEST_CASE("apply_update rules", "[nn]") {
  SECTION("zero learning rate leaves parameters unchanged") {
    auto p = init_network({3, 2}, 1);
    const auto before = p;
    auto g = p;  // any non-zero gradient
    for (auto rule : {UpdateRule::GradientDescent, UpdateRule::Adam}) {
      OptimizerState s;
      s.rule = rule;
      s.learning_rate = 0.0;
      apply_update(p, g, s);
      CHECK(p == before);
    }
  }
  SECTION("plain gradient descent") {
    auto p = single_layer(Matrix(1, 1, 1.0), Vector{1.0});
    auto g = single_layer(Matrix(1, 1, 0.5), Vector{0.5});
    OptimizerState s;
    s.rule = UpdateRule::GradientDescent;
    s.learning_rate = 0.1;
    apply_update(p, g, s);
    CHECK(p.layers[0].weight(0, 0) == Approx(0.95).epsilon(1e-15));
  }
  SECTION("adam first step moves by about the learning rate") {
    auto p = single_layer(Matrix(1, 1, 1.0), Vector{1.0});
    auto g = single_layer(Matrix(1, 1, 0.5), Vector{-0.5});
    OptimizerState s;
    s.learning_rate = 0.001;
    apply_update(p, g, s);
    // m_hat = 0.5, v_hat = 0.25 -> step = lr * 0.5 / (0.5 + 1e-8)
    const double step = 0.001 * 0.5 / (0.5 + 1e-8);
    CHECK(p.layers[0].weight(0, 0) == Approx(1.0 - step).epsilon(1e-15));
    CHECK(p.layers[0].bias[0] == Approx(1.0 + step).epsilon(1e-15));
    CHECK(step == Approx(0.001).epsilon(1e-7));
    CHECK(s.step == 1);
  }
  SECTION("shape mismatch") {
    auto p = init_network({3, 2}, 1);
    const auto g = init_network({3, 3}, 1);
    OptimizerState s;
    CHECK_THROWS_AS(apply_update(p, g, s), InvalidArgument);
  }
}

TEST_CASE("gradient descent overfits a single example monotonically", "[nn][property]") {
  auto p = init_network({6, 10, 10, 5}, 8);
  const Vector x{0.5, -0.3, 0.8, 0.1, -0.9, 0.2};
  OptimizerState s;
  s.rule = UpdateRule::GradientDescent;
  s.learning_rate = 0.05;
  double prev = loss_softmax_xent(forward(p, x).logits(), 3);
  for (int step = 0; step < 50; ++step) {
    const auto g = backward(p, forward(p, x), 3);
    apply_update(p, g.params, s);
    const double loss = loss_softmax_xent(forward(p, x).logits(), 3);
    CHECK(loss < prev);
    prev = loss;
  }
}
