#include "hypercaps/capsnet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hypercaps::capsnet {

void LossConfig::validate() const {
  if (!(0.0 < m_minus && m_minus < m_plus && m_plus < 1.0)) {
    throw std::invalid_argument("margins must satisfy 0 < m_minus < m_plus < 1");
  }
  if (!(absent_weight >= 0.0)) throw std::invalid_argument("absent-class weight must be non-negative");
}

template <typename T>
CapsuleParams<T> CapsuleParams<T>::zeros(std::size_t entity_dim, std::size_t capsule_dim) {
  CapsuleParams p;
  for (auto& w : p.transforms) w = Tensor<T>({capsule_dim, entity_dim});
  return p;
}

template <typename T>
CapsuleParams<T> CapsuleParams<T>::glorot(std::size_t entity_dim, std::size_t capsule_dim, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(entity_dim + capsule_dim));
  std::uniform_real_distribution<double> dist(-limit, limit);
  CapsuleParams p;
  for (auto& w : p.transforms) {
    w = Tensor<T>({capsule_dim, entity_dim});
    for (auto& v : w.values()) v = static_cast<T>(dist(rng));
  }
  return p;
}

template <typename T>
Var<T> squash(Var<T> s) {
  const auto& sv = s.value();
  T norm_sq = 0;
  for (T x : sv.values()) norm_sq += x * x;
  const T norm = std::sqrt(norm_sq);
  const T gain = norm / (T{1} + norm_sq);
  Tensor<T> out = sv;
  for (auto& x : out.values()) x *= gain;
  const std::size_t sid = s.id;
  return s.tape->record("squash", std::move(out), {s}, [sid](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(sid)) return;
    const auto& sv = t.value(sid);
    const auto& g = t.node(self).grad;
    T norm_sq = 0, s_dot_g = 0;
    for (std::size_t i = 0; i < sv.size(); ++i) {
      norm_sq += sv[i] * sv[i];
      s_dot_g += sv[i] * g[i];
    }
    const T norm = std::sqrt(norm_sq);
    // Jacobian is zero at the origin.
    if (norm == T{0}) return;
    const T denom = T{1} + norm_sq;
    const T gain = norm / denom;
    const T gain_slope_over_norm = (T{1} - norm_sq) / (denom * denom) / norm;
    auto& gs = t.grad_buffer(sid);
    for (std::size_t i = 0; i < sv.size(); ++i) gs[i] += gain * g[i] + gain_slope_over_norm * s_dot_g * sv[i];
  });
}

Tensor<double> squash_values(const Tensor<double>& s) {
  Tape<double> tape;
  return squash(tape.constant(s)).value();
}

template <typename T>
PredictionVectors<T> predict_vectors(Var<T> u1, Var<T> u2, std::span<const Var<T>, 4> transforms) {
  PredictionVectors<T> out;
  const std::array<Var<T>, kInputCapsules> u{u1, u2};
  for (std::size_t i = 0; i < kInputCapsules; ++i) {
    for (std::size_t j = 0; j < kOutputCapsules; ++j) {
      out[i * kOutputCapsules + j] = numerics::matmul_nt(u[i], transforms[i * kOutputCapsules + j]);
    }
  }
  return out;
}

template <typename T>
CapsuleOutputs<T> dynamic_routing(const PredictionVectors<T>& u_hat, int iterations, RoutingTrace* trace) {
  using namespace numerics;
  if (iterations < 1) throw std::invalid_argument("routing needs at least one iteration");
  auto& tape = *u_hat[0].tape;
  auto logits = tape.constant(Tensor<T>({kInputCapsules, kOutputCapsules}));
  CapsuleOutputs<T> out;
  for (int iter = 0; iter < iterations; ++iter) {
    const auto coupling = softmax(logits, 1);
    if (trace) {
      const auto& c = coupling.value();
      trace->emplace_back(c.values().begin(), c.values().end());
    }
    for (std::size_t j = 0; j < kOutputCapsules; ++j) {
      auto total = scale_by(u_hat[j], element(coupling, j));
      for (std::size_t i = 1; i < kInputCapsules; ++i) {
        total = add(total, scale_by(u_hat[i * kOutputCapsules + j], element(coupling, i * kOutputCapsules + j)));
      }
      out.v[j] = squash(total);
    }
    if (iter + 1 < iterations) {
      std::vector<Var<T>> agreement;
      for (std::size_t i = 0; i < kInputCapsules; ++i) {
        for (std::size_t j = 0; j < kOutputCapsules; ++j) agreement.push_back(dot(u_hat[i * kOutputCapsules + j], out.v[j]));
      }
      logits = add(logits, pack<T>(agreement, {kInputCapsules, kOutputCapsules}));
    }
  }
  for (std::size_t j = 0; j < kOutputCapsules; ++j) out.lengths[j] = l2_norm(out.v[j]);
  return out;
}

template <typename T>
Var<T> margin_loss(const CapsuleOutputs<T>& outputs, Label label, const LossConfig& cfg) {
  using namespace numerics;
  const std::size_t target = label == Label::positive ? 0 : 1;
  Var<T> total{};
  for (std::size_t j = 0; j < kOutputCapsules; ++j) {
    const auto len = outputs.lengths[j];
    Var<T> term;
    if (j == target) {
      term = square(relu(affine(len, T{-1}, static_cast<T>(cfg.m_plus))));
    } else {
      term = square(relu(affine(len, T{1}, static_cast<T>(-cfg.m_minus))));
      if (cfg.absent_weight != 1.0) term = affine(term, static_cast<T>(cfg.absent_weight), T{0});
    }
    total = j == 0 ? term : add(total, term);
  }
  return total;
}

double margin_loss(double length_hypernymy, double length_none, Label label, const LossConfig& cfg) {
  const double lengths[kOutputCapsules] = {length_hypernymy, length_none};
  const std::size_t target = label == Label::positive ? 0 : 1;
  double total = 0.0;
  for (std::size_t j = 0; j < kOutputCapsules; ++j) {
    if (j == target) {
      const double h = std::max(0.0, cfg.m_plus - lengths[j]);
      total += h * h;
    } else {
      const double h = std::max(0.0, lengths[j] - cfg.m_minus);
      total += cfg.absent_weight * h * h;
    }
  }
  return total;
}

Label classify(double length_hypernymy, double length_none) {
  return length_hypernymy > length_none ? Label::positive : Label::negative;
}

#define HYPERCAPS_INSTANTIATE_CAPSNET(T)                                                             \
  template struct CapsuleParams<T>;                                                                  \
  template Var<T> squash(Var<T>);                                                                    \
  template PredictionVectors<T> predict_vectors(Var<T>, Var<T>, std::span<const Var<T>, 4>);         \
  template CapsuleOutputs<T> dynamic_routing(const PredictionVectors<T>&, int, RoutingTrace*);       \
  template Var<T> margin_loss(const CapsuleOutputs<T>&, Label, const LossConfig&);

HYPERCAPS_INSTANTIATE_CAPSNET(float)
HYPERCAPS_INSTANTIATE_CAPSNET(double)

}  // namespace hypercaps::capsnet
