#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>

#include "helpers.hpp"

using namespace hypercaps::numerics;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

// Reverse-mode vs central differences for a unary op on random inputs.
double check_unary(const std::function<Var<double>(Var<double>)>& op, Shape shape, std::uint64_t seed,
                   double lo = -2.0, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  auto x = random_tensor(std::move(shape), rng, lo, hi);
  return grad_check([&](Tape<double>&, std::span<const Var<double>> v) { return weighted_sum(op(v[0])); }, {x})
      .max_relative_error;
}

double check_binary(const std::function<Var<double>(Var<double>, Var<double>)>& op, Shape sa, Shape sb,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto a = random_tensor(std::move(sa), rng);
  auto b = random_tensor(std::move(sb), rng);
  return grad_check([&](Tape<double>&, std::span<const Var<double>> v) { return weighted_sum(op(v[0], v[1])); }, {a, b})
      .max_relative_error;
}

}  // namespace

TEST_CASE("matmul closed forms") {
  Tape<double> t;
  auto eye = t.constant(Tensor<double>({2, 2}, {1, 0, 0, 1}));
  auto m = t.constant(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  CHECK(matmul(eye, m).value() == Tensor<double>({2, 2}, {1, 2, 3, 4}));

  auto r = t.constant(Tensor<double>({1, 2}, {1, 2}));
  auto c = t.constant(Tensor<double>({2, 1}, {3, 4}));
  CHECK(matmul(r, c).value() == Tensor<double>({1, 1}, {11}));
}

TEST_CASE("matmul gradient of sum is ones * b^T") {
  std::mt19937_64 rng(7);
  const auto av = random_tensor({3, 4}, rng);
  const auto bv = random_tensor({4, 2}, rng);
  Tape<double> t;
  auto a = t.variable(av);
  auto b = t.variable(bv);
  t.backward(sum(matmul(a, b)));
  const auto ga = t.grad(a);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) CHECK(ga.at(i, k) == doctest::Approx(bv.at(k, 0) + bv.at(k, 1)).epsilon(1e-12));
  }
  const auto rep = grad_check([](Tape<double>&, std::span<const Var<double>> v) { return sum(matmul(v[0], v[1])); },
                              {av, bv});
  CHECK(rep.max_relative_error < 1e-6);
  CHECK(rep.coordinates == 20);
}

TEST_CASE("shape mismatch names both shapes") {
  Tape<double> t;
  auto a = t.constant(Tensor<double>({2, 3}));
  auto b = t.constant(Tensor<double>({2, 4}));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x4]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, t.constant(Tensor<double>({3, 2}))), DimensionError);
  CHECK_THROWS_AS(concat(a, t.constant(Tensor<double>({3, 2})), 1), DimensionError);
  CHECK_THROWS_AS(add(a, b), DimensionError);
}

TEST_CASE("elementwise closed forms") {
  Tape<double> t;
  auto z = t.constant(Tensor<double>::scalar(0.0));
  CHECK(sigmoid(z).value()[0] == 0.5);
  CHECK(hypercaps::numerics::tanh(z).value()[0] == 0.0);
  auto c = concat(t.constant(Tensor<double>::vector({1, 2})), t.constant(Tensor<double>::vector({3})), 0);
  CHECK(c.value() == Tensor<double>::vector({1, 2, 3}));
}

TEST_CASE("softmax closed forms and stability") {
  Tape<double> t;
  auto a = softmax(t.constant(Tensor<double>({1, 2}, {0, 0})), 1).value();
  CHECK(a[0] == 0.5);
  CHECK(a[1] == 0.5);
  auto b = softmax(t.constant(Tensor<double>({1, 2}, {1000, 1000})), 1).value();
  CHECK(b[0] == 0.5);
  CHECK(b[1] == 0.5);
  auto c = softmax(t.constant(Tensor<double>({1, 2}, {std::log(1.0), std::log(3.0)})), 1).value();
  CHECK(c[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and is permutation-equivariant") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_tensor({1, 6}, rng, -20, 20);
    auto y = softmax_values(x, 1);
    double s = 0;
    for (double v : y.values()) s += v;
    CHECK(std::abs(s - 1.0) < 1e-6);

    std::vector<std::size_t> perm{5, 3, 1, 0, 4, 2};
    Tensor<double> xp({1, 6});
    for (std::size_t i = 0; i < 6; ++i) xp[i] = x[perm[i]];
    auto yp = softmax_values(xp, 1);
    for (std::size_t i = 0; i < 6; ++i) CHECK(yp[i] == doctest::Approx(y[perm[i]]).epsilon(1e-12));
  }
}

TEST_CASE("l2_norm values and zero subgradient") {
  Tape<double> t;
  CHECK(l2_norm(t.constant(Tensor<double>::vector({3, 4}))).value()[0] == 5.0);
  auto z = t.variable(Tensor<double>::vector({0, 0}));
  auto n = l2_norm(z);
  CHECK(n.value()[0] == 0.0);
  t.backward(n);
  CHECK(t.grad(z) == Tensor<double>::vector({0, 0}));
  CHECK(check_unary([](Var<double> x) { return l2_norm(x); }, {64}, 11) < 1e-6);
}

TEST_CASE("grad_check harness") {
  auto rep = grad_check([](Tape<double>&, std::span<const Var<double>> v) { return square(v[0]); },
                        {Tensor<double>::scalar(3.0)}, 1e-5);
  CHECK(rep.max_relative_error < 1e-8);
  CHECK_THROWS_AS(grad_check(
                      [](Tape<double>& t, std::span<const Var<double>> v) {
                        return scale_by(v[0], t.constant(Tensor<double>::scalar(INFINITY)));
                      },
                      {Tensor<double>::scalar(1.0)}),
                  EvaluationError);
}

TEST_CASE("every differentiable op matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    CHECK(check_binary([](auto a, auto b) { return matmul(a, b); }, {3, 4}, {4, 2}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return matmul_nt(a, b); }, {3, 4}, {2, 4}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return add(a, b); }, {2, 3}, {2, 3}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return sub(a, b); }, {2, 3}, {2, 3}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return elementwise_mul(a, b); }, {2, 3}, {2, 3}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return scale_by(a, b); }, {2, 3}, {1}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return shift_by(a, b); }, {2, 3}, {1}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return dot(a, b); }, {5}, {5}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return concat(a, b, 0); }, {2, 3}, {1, 3}, seed) < 1e-4);
    CHECK(check_binary([](auto a, auto b) { return concat(a, b, 1); }, {2, 3}, {2, 2}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return affine(x, 1.7, -0.3); }, {4}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return sigmoid(x); }, {2, 3}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return hypercaps::numerics::tanh(x); }, {2, 3}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return square(x); }, {2, 3}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return sum(x); }, {2, 3}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return l2_norm(x); }, {7}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return softmax(x, 0); }, {3, 2}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return softmax(x, 1); }, {3, 2}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return slice(x, 1, 1, 3); }, {3, 4}, seed) < 1e-4);
    CHECK(check_unary([](auto x) { return element(x, 4); }, {3, 4}, seed) < 1e-4);
    // relu away from its kink
    CHECK(check_unary([](auto x) { return relu(x); }, {6}, seed, 0.1, 2.0) < 1e-4);
    CHECK(check_unary([](auto x) { return relu(x); }, {6}, seed, -2.0, -0.1) < 1e-4);
    CHECK(check_unary(
              [](auto x) {
                std::vector<std::size_t> ids{2, 0, 2};
                return gather_rows(x, std::span<const std::size_t>(ids));
              },
              {3, 4}, seed) < 1e-4);
    CHECK(check_unary(
              [](auto x) {
                std::vector<Var<double>> parts{element(x, 0), element(x, 3), element(x, 1), element(x, 0)};
                return pack(std::span<const Var<double>>(parts), Shape{2, 2});
              },
              {4}, seed) < 1e-4);
    CHECK(check_unary(
              [](auto x) {
                std::vector<Var<double>> rows{slice(x, 0, 0, 1), slice(x, 0, 2, 3)};
                return stack_rows(std::span<const Var<double>>(rows));
              },
              {3, 4}, seed) < 1e-4);
  }
}

TEST_CASE("concat then slice is the identity") {
  std::mt19937_64 rng(5);
  for (std::size_t axis : {0u, 1u}) {
    auto a = random_tensor({2, 3}, rng);
    auto b = random_tensor(axis == 0 ? Shape{4, 3} : Shape{2, 5}, rng);
    Tape<double> t;
    auto c = concat(t.constant(a), t.constant(b), axis);
    CHECK(slice(c, axis, 0, axis == 0 ? 2 : 3).value() == a);
    CHECK(slice(c, axis, axis == 0 ? 2 : 3, axis == 0 ? 6 : 8).value() == b);
  }
}

TEST_CASE("operations keep finite values on finite input") {
  std::mt19937_64 rng(8);
  Tape<double> t;
  auto x = t.constant(random_tensor({3, 3}, rng, -50, 50));
  for (const auto& v : {sigmoid(x), hypercaps::numerics::tanh(x), softmax(x, 1), l2_norm(x), square(x)}) {
    for (double e : v.value().values()) CHECK(std::isfinite(e));
  }
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor<double>({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor<double>(Shape{0, 2}), DimensionError);
  Tensor<double> t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.cast<float>().shape() == t.shape());
}
