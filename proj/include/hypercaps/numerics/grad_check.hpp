#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hypercaps/numerics/tape.hpp"
#include "hypercaps/numerics/tensor.hpp"

namespace hypercaps::numerics {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Builds a scalar from the given leaves on a fresh tape.
using ScalarFunction = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients with central differences for every
// coordinate of every parameter. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const ScalarFunction& f, std::vector<Tensor<double>> params, double eps = 1e-5);

}  // namespace hypercaps::numerics
