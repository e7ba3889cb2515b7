#include "hypercaps/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hypercaps::numerics {

namespace {

double evaluate(const ScalarFunction& f, const std::vector<Tensor<double>>& params) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.constant(p));
  const auto out = f(tape, leaves);
  if (out.size() != 1) {
    throw DimensionError("grad_check: function must return a single value, got " + shape_to_string(out.shape()));
  }
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw EvaluationError("grad_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarFunction& f, std::vector<Tensor<double>> params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& p : params) leaves.push_back(tape.variable(p));
    const auto out = f(tape, leaves);
    if (out.size() != 1 || !std::isfinite(out.value()[0])) {
      throw EvaluationError("grad_check: function value is not a finite scalar");
    }
    tape.backward(out);
    for (const auto& leaf : leaves) analytic.push_back(tape.grad(leaf));
  }

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double original = params[p][i];
      params[p][i] = original + eps;
      const double plus = evaluate(f, params);
      params[p][i] = original - eps;
      const double minus = evaluate(f, params);
      params[p][i] = original;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[p][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = p;
        report.worst_index = i;
      }
      ++report.coordinates;
    }
  }
  return report;
}

}  // namespace hypercaps::numerics
