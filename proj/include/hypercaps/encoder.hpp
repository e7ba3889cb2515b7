#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "hypercaps/corpus.hpp"
#include "hypercaps/numerics/ops.hpp"

namespace hypercaps::encoder {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

// One GRU direction. W_* are [hidden × input], U_* are [hidden × hidden].
// There are no bias terms.
template <typename T>
struct GruParams {
  Tensor<T> w_reset, w_update, w_candidate;
  Tensor<T> u_reset, u_update, u_candidate;

  static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  // Uniform in ±sqrt(6 / (fan_in + fan_out)) per matrix.
  static GruParams glorot(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng);

  std::size_t input_dim() const { return w_reset.cols(); }
  std::size_t hidden_dim() const { return w_reset.rows(); }
};

// GruParams bound to a tape.
template <typename T>
struct GruVars {
  Var<T> w_reset, w_update, w_candidate;
  Var<T> u_reset, u_update, u_candidate;

  // With `trainable` false the leaves are constants.
  static GruVars bind(Tape<T>& tape, const GruParams<T>& params, bool trainable = true);
};

// Rows of the embedding table for `ids`, shape [ids × embed_dim].
template <typename T>
Var<T> embed(Var<T> table, std::span<const TokenId> ids);

// One step of the gated recurrence. x is [1 × input], h_prev [1 × hidden].
template <typename T>
Var<T> gru_cell(Var<T> x, Var<T> h_prev, const GruVars<T>& p);

// Same recurrence given the input projections W_r x, W_u x, W_c x.
template <typename T>
Var<T> gru_step(Var<T> x_reset, Var<T> x_update, Var<T> x_candidate, Var<T> h_prev, const GruVars<T>& p);

// Forward and backward scans over [T × input] from zero states; row t of
// the result is [h_fwd_t ; h_bwd_t], shape [T × 2·hidden].
template <typename T>
Var<T> bigru_encode(Var<T> embedded, const GruVars<T>& fwd, const GruVars<T>& bwd);

}  // namespace hypercaps::encoder
