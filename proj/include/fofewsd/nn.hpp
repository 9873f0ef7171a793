#pragma once

// Fully-connected network kernel: rectifier hidden layers, affine output
// layer producing logits, softmax cross-entropy loss, exact backpropagation,
// and two update rules (plain gradient descent and Adam).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "fofewsd/error.hpp"
#include "fofewsd/random.hpp"
#include "fofewsd/tensor.hpp"

namespace fofewsd::nn {

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out

  bool operator==(const Layer&) const = default;
};

struct NetworkParams {
  Matrix embedding;  // |V| x d; empty for a bare network
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

  std::vector<std::size_t> layer_dims() const {
    std::vector<std::size_t> dims;
    if (layers.empty()) return dims;
    dims.push_back(input_dim());
    for (const auto& l : layers) dims.push_back(l.weight.rows());
    return dims;
  }

  // Same shapes, all zero.
  NetworkParams zeros_like() const {
    NetworkParams z;
    z.embedding = Matrix(embedding.rows(), embedding.cols());
    for (const auto& l : layers) z.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size())});
    return z;
  }

  bool same_shape(const NetworkParams& o) const {
    if (embedding.rows() != o.embedding.rows() || embedding.cols() != o.embedding.cols()) return false;
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& a = layers[i];
      const auto& b = o.layers[i];
      if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.bias.size() != b.bias.size())
        return false;
    }
    return true;
  }

  bool operator==(const NetworkParams&) const = default;
};

// Calls f(span...) for each parameter tensor, in declaration order
// (embedding, then weight and bias of each layer), across several
// identically-shaped parameter sets at once.
template <typename F, typename... Params>
void for_each_tensor(F&& f, Params&... ps) {
  f(ps.embedding.values()...);
  auto& first = std::get<0>(std::forward_as_tuple(ps...));
  for (std::size_t i = 0; i < first.layers.size(); ++i) {
    f(ps.layers[i].weight.values()...);
    f(std::span(ps.layers[i].bias)...);
  }
}

inline std::size_t parameter_count(const NetworkParams& p) {
  std::size_t n = 0;
  for_each_tensor([&](auto s) { n += s.size(); }, p);
  return n;
}

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero, embedding
// rows uniform in +-0.05. Draw order: embedding, then layers in order.
inline NetworkParams init_network(const std::vector<std::size_t>& layer_dims, std::uint64_t seed,
                                  std::size_t embedding_rows = 0, std::size_t embedding_dim = 0) {
  if (layer_dims.size() < 2) throw InvalidArgument("need at least input and output");
  for (auto d : layer_dims)
    if (d < 1) throw InvalidArgument("layer dimensions must be at least 1");
  Rng rng(seed);
  NetworkParams p;
  p.embedding = Matrix(embedding_rows, embedding_dim);
  for (double& v : p.embedding.values()) v = rng.uniform(-0.05, 0.05);
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const std::size_t in = layer_dims[i];
    const std::size_t out = layer_dims[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Layer l{Matrix(out, in), Vector(out, 0.0)};
    for (double& v : l.weight.values()) v = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(l));
  }
  return p;
}

// activations[0] is the input, activations[i] the output of layer i; the last
// entry holds the logits. pre_activations[i] is layer i's affine output before
// the rectifier.
struct ForwardTrace {
  std::vector<Vector> pre_activations;
  std::vector<Vector> activations;

  const Vector& input() const { return activations.front(); }
  const Vector& logits() const { return activations.back(); }
  // Output of the second-last layer.
  const Vector& held_out() const { return activations[activations.size() >= 2 ? activations.size() - 2 : 0]; }
};

inline ForwardTrace forward(const NetworkParams& params, std::span<const double> input) {
  if (!params.layers.empty() && input.size() != params.input_dim())
    throw InvalidArgument("input dimension " + std::to_string(input.size()) + " does not match network input " +
                          std::to_string(params.input_dim()));
  ForwardTrace trace;
  trace.activations.emplace_back(input.begin(), input.end());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    const Vector& x = trace.activations.back();
    Vector z(layer.bias);
    for (std::size_t r = 0; r < z.size(); ++r) z[r] += dot(layer.weight.row(r), x);
    Vector a = z;
    if (i + 1 < params.layers.size())
      for (double& v : a) v = std::max(0.0, v);
    trace.pre_activations.push_back(std::move(z));
    trace.activations.push_back(std::move(a));
  }
  return trace;
}

// Activation of the second-last layer without evaluating the output layer.
// For a single-layer network this is the input itself.
inline Vector held_out_activation(const NetworkParams& params, std::span<const double> input) {
  if (!params.layers.empty() && input.size() != params.input_dim())
    throw InvalidArgument("input dimension does not match network input");
  Vector x(input.begin(), input.end());
  for (std::size_t i = 0; i + 1 < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    Vector a(layer.bias);
    for (std::size_t r = 0; r < a.size(); ++r) a[r] = std::max(0.0, a[r] + dot(layer.weight.row(r), x));
    x = std::move(a);
  }
  return x;
}

inline double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

inline Vector softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= s;
  return p;
}

inline double loss_softmax_xent(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size())
    throw InvalidArgument("target " + std::to_string(target) + " out of range for " +
                          std::to_string(logits.size()) + " logits");
  return log_sum_exp(logits) - logits[target];
}

// Adds scale * d(loss)/d(params) into grad and returns d(loss)/d(input)
// (unscaled). grad must have the shape of params; its embedding is untouched.
inline Vector backward_into(const NetworkParams& params, const ForwardTrace& trace, std::size_t target,
                            NetworkParams& grad, double scale = 1.0) {
  const std::size_t L = params.layers.size();
  if (trace.activations.size() != L + 1 || trace.pre_activations.size() != L)
    throw InvalidArgument("stale trace: layer count mismatch");
  for (std::size_t i = 0; i < L; ++i)
    if (trace.activations[i + 1].size() != params.layers[i].weight.rows() ||
        trace.activations[i].size() != params.layers[i].weight.cols())
      throw InvalidArgument("stale trace: dimension mismatch at layer " + std::to_string(i));
  if (!grad.same_shape(params)) throw InvalidArgument("gradient buffer shape mismatch");
  if (target >= trace.logits().size()) throw InvalidArgument("target out of range");

  Vector delta = softmax(trace.logits());
  delta[target] -= 1.0;
  for (std::size_t i = L; i-- > 0;) {
    const auto& layer = params.layers[i];
    auto& g = grad.layers[i];
    const Vector& x = trace.activations[i];
    for (std::size_t r = 0; r < delta.size(); ++r) {
      if (delta[r] == 0.0) continue;
      axpy(scale * delta[r], x, g.weight.row(r));
      g.bias[r] += scale * delta[r];
    }
    Vector prev(layer.weight.cols(), 0.0);
    for (std::size_t r = 0; r < delta.size(); ++r)
      if (delta[r] != 0.0) axpy(delta[r], layer.weight.row(r), prev);
    if (i > 0) {
      const Vector& z = trace.pre_activations[i - 1];
      for (std::size_t c = 0; c < prev.size(); ++c)
        if (z[c] <= 0.0) prev[c] = 0.0;
    }
    delta = std::move(prev);
  }
  return delta;
}

struct Gradients {
  NetworkParams params;  // embedding left zero
  Vector input;
};

inline Gradients backward(const NetworkParams& params, const ForwardTrace& trace, std::size_t target) {
  Gradients g{params.zeros_like(), {}};
  g.input = backward_into(params, trace, target, g.params);
  return g;
}

enum class UpdateRule { GradientDescent, Adam };

struct OptimizerState {
  UpdateRule rule = UpdateRule::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  NetworkParams first_moment;   // Adam only, shaped like params
  NetworkParams second_moment;  // Adam only
};

inline void apply_update(NetworkParams& params, const NetworkParams& grad, OptimizerState& state) {
  if (!grad.same_shape(params)) throw InvalidArgument("gradient shape does not match parameters");
  if (state.rule == UpdateRule::GradientDescent) {
    const double lr = state.learning_rate;
    for_each_tensor(
        [lr](std::span<double> p, std::span<const double> g) {
          for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
        },
        params, grad);
    ++state.step;
    return;
  }
  if (state.step == 0 && !state.first_moment.same_shape(params)) {
    state.first_moment = params.zeros_like();
    state.second_moment = params.zeros_like();
  }
  if (!state.first_moment.same_shape(params) || !state.second_moment.same_shape(params))
    throw InvalidArgument("optimizer state shape does not match parameters");
  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = state.learning_rate;
  const double eps = state.epsilon;
  for_each_tensor(
      [&](std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = b1 * m[i] + (1.0 - b1) * g[i];
          v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
          const double m_hat = m[i] / c1;
          const double v_hat = v[i] / c2;
          p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
      },
      params, grad, state.first_moment, state.second_moment);
}

using GradientFn = std::function<NetworkParams(const NetworkParams&, std::span<const double>, std::size_t)>;

inline NetworkParams analytic_gradient(const NetworkParams& params, std::span<const double> input,
                                       std::size_t target) {
  return backward(params, forward(params, input), target).params;
}

namespace detail {

// Cross-entropy of the network output evaluated in extended precision. The
// finite-difference quotient subtracts two O(1) losses that differ by about
// eps * gradient, so double rounding alone would swamp gradients near 1e-7.
inline long double reference_loss(const NetworkParams& params, std::span<const double> input, std::size_t target) {
  std::vector<long double> x(input.begin(), input.end());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    std::vector<long double> z(layer.bias.begin(), layer.bias.end());
    for (std::size_t r = 0; r < z.size(); ++r)
      for (std::size_t c = 0; c < x.size(); ++c) z[r] += static_cast<long double>(layer.weight(r, c)) * x[c];
    if (i + 1 < params.layers.size())
      for (auto& v : z) v = std::max(0.0L, v);
    x = std::move(z);
  }
  if (target >= x.size()) throw InvalidArgument("target index out of range");
  const long double m = *std::max_element(x.begin(), x.end());
  long double sum = 0.0L;
  for (auto v : x) sum += std::exp(v - m);
  return m + std::log(sum) - x[target];
}

}  // namespace detail

// Largest relative disagreement between an analytic gradient and central
// differences (L(p+eps) - L(p-eps)) / 2eps over every layer parameter:
// max |a - n| / max(|a|, |n|, 1e-12). Parameters stay in double; only the
// reference losses are evaluated in extended precision. The embedding is not
// part of the network function and is skipped.
inline double gradient_check(const NetworkParams& params, std::span<const double> input, std::size_t target,
                             double epsilon, const GradientFn& gradient = analytic_gradient) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!params.layers.empty() && input.size() != params.input_dim())
    throw InvalidArgument("input dimension does not match network input");
  const NetworkParams analytic = gradient(params, input, target);
  NetworkParams probe = params;
  auto loss = [&] { return detail::reference_loss(probe, input, target); };
  double worst = 0.0;
  auto check = [&](std::span<double> p, std::span<const double> a) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      // Divide by the step actually taken after rounding the probe points.
      const double hi = saved + epsilon;
      const double lo = saved - epsilon;
      p[i] = hi;
      const long double up = loss();
      p[i] = lo;
      const long double down = loss();
      p[i] = saved;
      const double numeric = static_cast<double>((up - down) / (static_cast<long double>(hi) - lo));
      const double denom = std::max({std::abs(a[i]), std::abs(numeric), 1e-12});
      worst = std::max(worst, std::abs(a[i] - numeric) / denom);
    }
  };
  for (std::size_t i = 0; i < probe.layers.size(); ++i) {
    check(probe.layers[i].weight.values(), analytic.layers[i].weight.values());
    check(probe.layers[i].bias, analytic.layers[i].bias);
  }
  return worst;
}

}  // namespace fofewsd::nn
