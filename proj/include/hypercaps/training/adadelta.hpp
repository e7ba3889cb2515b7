#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypercaps/numerics/tensor.hpp"

namespace hypercaps::training {

using numerics::Tensor;

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdaDeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;

  bool operator==(const AdaDeltaConfig&) const = default;
};

// Running averages E[g²] and E[Δx²] per parameter, zero-initialised.
template <typename T>
struct AdaDeltaState {
  std::vector<Tensor<T>> mean_sq_grad;
  std::vector<Tensor<T>> mean_sq_update;

  static AdaDeltaState for_params(std::span<Tensor<T>* const> params) {
    AdaDeltaState s;
    for (const auto* p : params) {
      s.mean_sq_grad.emplace_back(p->shape());
      s.mean_sq_update.emplace_back(p->shape());
    }
    return s;
  }
};

// One AdaDelta update per coordinate:
//   E[g²]  ← ρ E[g²] + (1-ρ) g²
//   Δx     ← -sqrt(E[Δx²] + ε) / sqrt(E[g²] + ε) · g
//   E[Δx²] ← ρ E[Δx²] + (1-ρ) Δx²
//   x      ← x + Δx
// Gradients are checked before anything is modified; a non-finite entry
// aborts the step with NonFiniteGradient.
template <typename T>
void adadelta_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdaDeltaState<T>& state,
                   const AdaDeltaConfig& cfg = {}) {
  if (params.size() != grads.size() || params.size() != state.mean_sq_grad.size()) {
    throw numerics::DimensionError("adadelta_step: parameter, gradient and state counts differ");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p]->shape() != grads[p]->shape() || params[p]->shape() != state.mean_sq_grad[p].shape()) {
      throw numerics::DimensionError("adadelta_step: parameter " + std::to_string(p) + " has shape " +
                                     numerics::shape_to_string(params[p]->shape()) + " but gradient " +
                                     numerics::shape_to_string(grads[p]->shape()));
    }
    const auto& g = *grads[p];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NonFiniteGradient("non-finite gradient in parameter " + std::to_string(p) + " at coordinate " +
                                std::to_string(i));
      }
    }
  }
  const T rho = static_cast<T>(cfg.rho);
  const T eps = static_cast<T>(cfg.epsilon);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& x = *params[p];
    const auto& g = *grads[p];
    auto& eg = state.mean_sq_grad[p];
    auto& edx = state.mean_sq_update[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      eg[i] = rho * eg[i] + (T{1} - rho) * g[i] * g[i];
      const T dx = -std::sqrt(edx[i] + eps) / std::sqrt(eg[i] + eps) * g[i];
      edx[i] = rho * edx[i] + (T{1} - rho) * dx * dx;
      x[i] += dx;
    }
  }
}

}  // namespace hypercaps::training
