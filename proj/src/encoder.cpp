#include "hypercaps/encoder.hpp"

#include <cmath>
#include <vector>

namespace hypercaps::encoder {

namespace {

template <typename T>
Tensor<T> glorot_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor<T> m({rows, cols});
  for (auto& v : m.values()) v = static_cast<T>(dist(rng));
  return m;
}

}  // namespace

template <typename T>
GruParams<T> GruParams<T>::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  GruParams p;
  for (auto* w : {&p.w_reset, &p.w_update, &p.w_candidate}) *w = Tensor<T>({hidden_dim, input_dim});
  for (auto* u : {&p.u_reset, &p.u_update, &p.u_candidate}) *u = Tensor<T>({hidden_dim, hidden_dim});
  return p;
}

template <typename T>
GruParams<T> GruParams<T>::glorot(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
  GruParams p;
  for (auto* w : {&p.w_reset, &p.w_update, &p.w_candidate}) *w = glorot_matrix<T>(hidden_dim, input_dim, rng);
  for (auto* u : {&p.u_reset, &p.u_update, &p.u_candidate}) *u = glorot_matrix<T>(hidden_dim, hidden_dim, rng);
  return p;
}

template <typename T>
GruVars<T> GruVars<T>::bind(Tape<T>& tape, const GruParams<T>& params, bool trainable) {
  const auto leaf = [&](const Tensor<T>& m) { return trainable ? tape.parameter(m) : tape.reference(m); };
  return GruVars{leaf(params.w_reset), leaf(params.w_update), leaf(params.w_candidate),
                 leaf(params.u_reset), leaf(params.u_update), leaf(params.u_candidate)};
}

template <typename T>
Var<T> embed(Var<T> table, std::span<const TokenId> ids) {
  return numerics::gather_rows(table, ids);
}

template <typename T>
Var<T> gru_step(Var<T> x_reset, Var<T> x_update, Var<T> x_candidate, Var<T> h_prev, const GruVars<T>& p) {
  using namespace numerics;
  const auto reset = sigmoid(add(x_reset, matmul_nt(h_prev, p.u_reset)));
  const auto update = sigmoid(add(x_update, matmul_nt(h_prev, p.u_update)));
  const auto candidate = tanh(add(x_candidate, matmul_nt(elementwise_mul(reset, h_prev), p.u_candidate)));
  return add(elementwise_mul(affine(update, T{-1}, T{1}), h_prev), elementwise_mul(update, candidate));
}

template <typename T>
Var<T> gru_cell(Var<T> x, Var<T> h_prev, const GruVars<T>& p) {
  using numerics::matmul_nt;
  return gru_step(matmul_nt(x, p.w_reset), matmul_nt(x, p.w_update), matmul_nt(x, p.w_candidate), h_prev, p);
}

namespace {

template <typename T>
Var<T> scan(Var<T> embedded, const GruVars<T>& p, bool reverse) {
  using namespace numerics;
  auto& tape = *embedded.tape;
  const std::size_t steps = embedded.shape()[0];
  const std::size_t hidden = p.u_reset.shape()[0];
  const auto proj_reset = matmul_nt(embedded, p.w_reset);
  const auto proj_update = matmul_nt(embedded, p.w_update);
  const auto proj_candidate = matmul_nt(embedded, p.w_candidate);

  std::vector<Var<T>> states(steps);
  auto h = tape.constant(Tensor<T>({1, hidden}));
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    h = gru_step(slice(proj_reset, 0, t, t + 1), slice(proj_update, 0, t, t + 1), slice(proj_candidate, 0, t, t + 1), h,
                 p);
    states[t] = h;
  }
  return stack_rows<T>(states);
}

}  // namespace

template <typename T>
Var<T> bigru_encode(Var<T> embedded, const GruVars<T>& fwd, const GruVars<T>& bwd) {
  if (embedded.value().rank() != 2) {
    throw numerics::DimensionError("bigru_encode: expected [T x input], got " +
                                   numerics::shape_to_string(embedded.shape()));
  }
  return numerics::concat(scan(embedded, fwd, false), scan(embedded, bwd, true), 1);
}

#define HYPERCAPS_INSTANTIATE_ENCODER(T)                                                  \
  template struct GruParams<T>;                                                           \
  template struct GruVars<T>;                                                             \
  template Var<T> embed(Var<T>, std::span<const TokenId>);                                \
  template Var<T> gru_step(Var<T>, Var<T>, Var<T>, Var<T>, const GruVars<T>&);            \
  template Var<T> gru_cell(Var<T>, Var<T>, const GruVars<T>&);                            \
  template Var<T> bigru_encode(Var<T>, const GruVars<T>&, const GruVars<T>&);

HYPERCAPS_INSTANTIATE_ENCODER(float)
HYPERCAPS_INSTANTIATE_ENCODER(double)

}  // namespace hypercaps::encoder
