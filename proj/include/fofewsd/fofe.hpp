#pragma once

// Fixed-size ordinally forgetting encoding.
//
// For a token sequence w_1..w_T the code follows z_0 = 0,
// z_t = alpha * z_{t-1} + e(w_t). Codes of order n stack the trailing partial
// codes [z_{T-n+1}, ..., z_T]; partial codes with non-positive index are zero.
// "Left" runs the recursion first-to-last, "right" runs it last-to-first, so
// in a context window the word adjacent to the target always has weight 1.
//
// Vocab-space codes (e = one-hot) are the reference form used by tests and the
// decoder. Production code uses the embedding-space form (e = embedding row),
// which is the same linear map followed by a product with the embedding matrix.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fofewsd/corpus.hpp"
#include "fofewsd/error.hpp"
#include "fofewsd/tensor.hpp"

namespace fofewsd::fofe {

enum class Direction { Left, Right };

struct FofeConfig {
  double alpha = 0.7;
  std::size_t order = 3;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw InvalidArgument("forgetting factor must lie in (0, 1), got " + std::to_string(alpha));
    if (order < 1) throw InvalidArgument("FOFE order must be at least 1");
  }

  bool operator==(const FofeConfig&) const = default;
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidArgument("forgetting factor must lie in (0, 1), got " + std::to_string(alpha));
}

inline void check_ids(std::span<const TokenId> seq, std::size_t vocab_size) {
  for (TokenId id : seq)
    if (id >= vocab_size)
      throw InvalidArgument("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                            std::to_string(vocab_size));
}

// Visits the sequence in recursion order for the given direction.
template <typename F>
void for_each_in_order(std::span<const TokenId> seq, Direction dir, F&& f) {
  if (dir == Direction::Left) {
    for (std::size_t t = 0; t < seq.size(); ++t) f(t, seq[t]);
  } else {
    for (std::size_t t = 0; t < seq.size(); ++t) f(t, seq[seq.size() - 1 - t]);
  }
}

// Core recursion over rows of a |V| x dim "basis" lookup. row(id, span) adds
// the basis vector of id into the span. Writes `order` slabs of size dim.
template <typename AddRow>
Vector run_recursion(std::span<const TokenId> seq, double alpha, std::size_t order, std::size_t dim,
                     Direction dir, AddRow&& add_row) {
  Vector out(order * dim, 0.0);
  Vector z(dim, 0.0);
  const std::size_t T = seq.size();
  for_each_in_order(seq, dir, [&](std::size_t t, TokenId id) {
    for (double& v : z) v *= alpha;
    add_row(id, std::span<double>(z));
    // After step t (0-based) z holds z_{t+1}; slab j holds z_{T-order+1+j}.
    const std::size_t step = t + 1;
    if (step + order > T) {
      const std::size_t slab = step + order - 1 - T;
      std::copy(z.begin(), z.end(), out.begin() + static_cast<std::ptrdiff_t>(slab * dim));
    }
  });
  return out;
}

}  // namespace detail

// Vocab-space code of the given order; dimension order * vocab_size.
inline Vector encode_order(std::span<const TokenId> seq, const FofeConfig& cfg, std::size_t vocab_size,
                           Direction dir) {
  cfg.validate();
  detail::check_ids(seq, vocab_size);
  return detail::run_recursion(seq, cfg.alpha, cfg.order, vocab_size, dir,
                               [](TokenId id, std::span<double> z) { z[id] += 1.0; });
}

inline Vector encode_left(std::span<const TokenId> seq, double alpha, std::size_t vocab_size) {
  detail::check_alpha(alpha);
  return encode_order(seq, {alpha, 1}, vocab_size, Direction::Left);
}

inline Vector encode_right(std::span<const TokenId> seq, double alpha, std::size_t vocab_size) {
  detail::check_alpha(alpha);
  return encode_order(seq, {alpha, 1}, vocab_size, Direction::Right);
}

// Embedding-space code; dimension order * embeddings.cols().
inline Vector encode_embedded(std::span<const TokenId> seq, const FofeConfig& cfg, Direction dir,
                              const Matrix& embeddings) {
  cfg.validate();
  detail::check_ids(seq, embeddings.rows());
  return detail::run_recursion(seq, cfg.alpha, cfg.order, embeddings.cols(), dir,
                               [&](TokenId id, std::span<double> z) {
                                 axpy(1.0, embeddings.row(id), z);
                               });
}

// Weight of the token at sequence position `pos` in slab `slab` of an
// order-`order` code. Zero when the token has not been consumed yet.
inline double coefficient(std::size_t T, std::size_t pos, std::size_t slab, std::size_t order,
                          double alpha, Direction dir) {
  // Step (1-based) at which the recursion consumes this token.
  const std::size_t consumed = dir == Direction::Left ? pos + 1 : T - pos;
  // Slab holds z_{T - order + 1 + slab}; guard against negative indices.
  if (T + slab + 1 < order + consumed) return 0.0;
  const std::size_t slab_step = T + slab + 1 - order;
  return std::pow(alpha, static_cast<double>(slab_step - consumed));
}

// Recovers the sequence behind a left vocab-space code (alpha < 0.5).
//
// Works from the most recent token backwards. After k tokens have been
// removed, the next one carries weight alpha^k and every other component of
// the residual sums to less than alpha^k * alpha / (1 - alpha) < alpha^k, so
// the pivot is the only component above the midpoint of the two bounds.
// Subtracting the known weight instead of rescaling by 1/alpha keeps rounding
// error from being amplified at every step.
inline TokenSequence decode(std::span<const double> code, double alpha, std::size_t max_len) {
  detail::check_alpha(alpha);
  if (alpha >= 0.5) throw InvalidArgument("decode requires alpha < 0.5");
  constexpr double kZeroTol = 1e-9;

  Vector residual(code.begin(), code.end());
  const double tail_bound = alpha / (1.0 - alpha);
  const double pivot_fraction = 0.5 * (1.0 + tail_bound);
  TokenSequence reversed;
  double weight = 1.0;
  while (true) {
    std::size_t pivot = 0;
    double best = -INFINITY;
    double lowest = INFINITY;
    for (std::size_t i = 0; i < residual.size(); ++i) {
      if (!std::isfinite(residual[i])) throw DataError("not a valid FOFE code");
      if (residual[i] > best) best = residual[i], pivot = i;
      lowest = std::min(lowest, residual[i]);
    }
    if (residual.empty() || best < weight * pivot_fraction) {
      if (!residual.empty() && (best > kZeroTol || lowest < -kZeroTol))
        throw DataError("not a valid FOFE code");
      break;
    }
    // A valid pivot is at most weight * (1 + tail_bound); allow slack for rounding.
    if (best > weight * (1.0 + tail_bound) * (1.0 + 1e-9) + kZeroTol)
      throw DataError("not a valid FOFE code");
    if (reversed.size() == max_len)
      throw DataError("not a valid FOFE code: more than " + std::to_string(max_len) + " tokens");
    reversed.push_back(static_cast<TokenId>(pivot));
    residual[pivot] -= weight;
    weight *= alpha;
  }
  return {reversed.rbegin(), reversed.rend()};
}

// Fixed-size context vector for the token at target_index: left code of the
// preceding tokens followed by right code of the succeeding tokens. The target
// itself is excluded. Dimension 2 * order * embeddings.cols().
inline Vector context_code(std::span<const TokenId> tokens, std::size_t target_index, const FofeConfig& cfg,
                           const Matrix& embeddings) {
  if (target_index >= tokens.size())
    throw InvalidArgument("target index " + std::to_string(target_index) + " out of range for " +
                          std::to_string(tokens.size()) + " tokens");
  Vector left = encode_embedded(tokens.first(target_index), cfg, Direction::Left, embeddings);
  const Vector right = encode_embedded(tokens.subspan(target_index + 1), cfg, Direction::Right, embeddings);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

// Adjoint of context_code with respect to the embedding matrix: adds
// d(loss)/d(embeddings) into grad given d(loss)/d(context code).
inline void accumulate_context_gradient(std::span<const TokenId> tokens, std::size_t target_index,
                                        const FofeConfig& cfg, std::span<const double> code_grad,
                                        Matrix& grad) {
  const std::size_t d = grad.cols();
  if (code_grad.size() != 2 * cfg.order * d)
    throw InvalidArgument("context gradient has wrong dimension");
  auto scatter = [&](std::span<const TokenId> seq, Direction dir, std::span<const double> g) {
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      auto row = grad.row(seq[pos]);
      for (std::size_t slab = 0; slab < cfg.order; ++slab) {
        const double c = coefficient(seq.size(), pos, slab, cfg.order, cfg.alpha, dir);
        if (c != 0.0) axpy(c, g.subspan(slab * d, d), row);
      }
    }
  };
  const std::size_t half = cfg.order * d;
  scatter(tokens.first(target_index), Direction::Left, code_grad.first(half));
  scatter(tokens.subspan(target_index + 1), Direction::Right, code_grad.subspan(half));
}

}  // namespace fofewsd::fofe
