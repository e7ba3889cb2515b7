#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hypercaps/numerics/grad_check.hpp"
#include "hypercaps/numerics/ops.hpp"

namespace testing {

using hypercaps::numerics::Shape;
using hypercaps::numerics::Tape;
using hypercaps::numerics::Tensor;
using hypercaps::numerics::Var;

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Reduces any output to a scalar with fixed random weights, so every output
// coordinate contributes a distinct gradient.
inline Var<double> weighted_sum(Var<double> x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  auto w = random_tensor(x.shape(), rng, 0.5, 1.5);
  auto& tape = *x.tape;
  return hypercaps::numerics::dot(x, tape.constant(std::move(w)));
}

}  // namespace testing
