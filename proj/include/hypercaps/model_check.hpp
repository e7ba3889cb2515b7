#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "hypercaps/numerics/grad_check.hpp"

// Finite-difference check of the whole network on one random pair.
namespace hypercaps::model {

struct ModelCheckConfig {
  std::size_t embed_dim = 8;
  std::size_t hidden_dim = 6;
  std::size_t capsule_dim = 5;
  // Longest entity including EOS.
  std::size_t max_length = 4;
  // Content tokens are drawn from this many symbols so pairs share tokens.
  std::size_t symbols = 5;
  int routing_iterations = 2;
  bool softmax_attention = false;
  // 1e-5 leaves round-off noise above the 1e-8 floor on near-zero gradients.
  double eps = 1e-4;
};

struct ModelCheckResult {
  std::uint64_t seed = 0;
  numerics::GradCheckReport report;
  std::string worst_param;  // name of the tensor holding the worst coordinate
};

// Parameters are drawn uniformly from [-1, 1]; attention a and b are
// included as trainable scalars.
ModelCheckResult model_grad_check(const ModelCheckConfig& cfg, std::uint64_t seed);

}  // namespace hypercaps::model
