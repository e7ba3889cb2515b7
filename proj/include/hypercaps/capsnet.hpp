#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "hypercaps/corpus.hpp"
#include "hypercaps/numerics/ops.hpp"

namespace hypercaps::capsnet {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

inline constexpr std::size_t kInputCapsules = 2;   // hypernym and hyponym entity vectors
inline constexpr std::size_t kOutputCapsules = 2;  // v_1 hypernymy, v_2 no hypernymy

// Transform matrices W_ij [capsule_dim × entity_dim], stored at i * 2 + j.
template <typename T>
struct CapsuleParams {
  std::array<Tensor<T>, kInputCapsules * kOutputCapsules> transforms;

  static CapsuleParams zeros(std::size_t entity_dim, std::size_t capsule_dim);
  static CapsuleParams glorot(std::size_t entity_dim, std::size_t capsule_dim, std::mt19937_64& rng);

  Tensor<T>& transform(std::size_t i, std::size_t j) { return transforms[i * kOutputCapsules + j]; }
  const Tensor<T>& transform(std::size_t i, std::size_t j) const { return transforms[i * kOutputCapsules + j]; }
};

template <typename T>
using PredictionVectors = std::array<Var<T>, kInputCapsules * kOutputCapsules>;

template <typename T>
struct CapsuleOutputs {
  std::array<Var<T>, kOutputCapsules> v;
  std::array<Var<T>, kOutputCapsules> lengths;

  T length(std::size_t j) const { return lengths[j].value()[0]; }
};

struct LossConfig {
  double m_plus = 0.9;
  double m_minus = 0.1;
  // Down-weight on the absent-class term; 1 leaves the loss undamped.
  double absent_weight = 1.0;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

// Coupling coefficients seen at each routing iteration, [inputs × outputs].
using RoutingTrace = std::vector<std::vector<double>>;

// v = (|s|² / (1 + |s|²)) · s / |s|, with squash(0) = 0.
template <typename T>
Var<T> squash(Var<T> s);

Tensor<double> squash_values(const Tensor<double>& s);

// û_{j|i} = W_ij · u_i for entity vectors u_i [1 × entity_dim]; each result
// is [1 × capsule_dim].
template <typename T>
PredictionVectors<T> predict_vectors(Var<T> u1, Var<T> u2, std::span<const Var<T>, 4> transforms);

// Routing-by-agreement from zero logits. Logits are per call and are not
// parameters; every iteration is recorded on the tape.
template <typename T>
CapsuleOutputs<T> dynamic_routing(const PredictionVectors<T>& u_hat, int iterations, RoutingTrace* trace = nullptr);

template <typename T>
Var<T> margin_loss(const CapsuleOutputs<T>& outputs, Label label, const LossConfig& cfg = {});

double margin_loss(double length_hypernymy, double length_none, Label label, const LossConfig& cfg = {});

// Positive iff |v_1| > |v_2|; ties are negative.
Label classify(double length_hypernymy, double length_none);

template <typename T>
Label classify(const CapsuleOutputs<T>& outputs) {
  return classify(static_cast<double>(outputs.length(0)), static_cast<double>(outputs.length(1)));
}

}  // namespace hypercaps::capsnet
