#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hypercaps/capsnet.hpp"

using namespace hypercaps;
using namespace hypercaps::capsnet;
using numerics::Shape;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

using Vec = std::vector<double>;

double norm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec squash_ref(const Vec& s) {
  const double n = norm(s);
  Vec out(s.size(), 0.0);
  if (n == 0.0) return out;
  const double k = n * n / (1 + n * n) / n;
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = k * s[i];
  return out;
}

// Step-by-step routing recurrence written out with plain vectors.
struct RefRouting {
  std::array<Vec, 2> v;
  std::vector<std::array<double, 4>> couplings;
};

RefRouting reference_routing(const std::array<Vec, 4>& u_hat, int r) {
  RefRouting out;
  double b[2][2] = {{0, 0}, {0, 0}};
  for (int it = 0; it < r; ++it) {
    double c[2][2];
    for (int i = 0; i < 2; ++i) {
      const double e0 = std::exp(b[i][0]), e1 = std::exp(b[i][1]);
      c[i][0] = e0 / (e0 + e1);
      c[i][1] = e1 / (e0 + e1);
    }
    out.couplings.push_back({c[0][0], c[0][1], c[1][0], c[1][1]});
    for (int j = 0; j < 2; ++j) {
      Vec s(u_hat[0].size(), 0.0);
      for (int i = 0; i < 2; ++i) {
        for (std::size_t k = 0; k < s.size(); ++k) s[k] += c[i][j] * u_hat[i * 2 + j][k];
      }
      out.v[j] = squash_ref(s);
    }
    if (it + 1 < r) {
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          double d = 0;
          for (std::size_t k = 0; k < out.v[j].size(); ++k) d += u_hat[i * 2 + j][k] * out.v[j][k];
          b[i][j] += d;
        }
      }
    }
  }
  return out;
}

PredictionVectors<double> leaves(Tape<double>& t, const std::array<Vec, 4>& u) {
  PredictionVectors<double> out;
  for (std::size_t k = 0; k < 4; ++k) out[k] = t.constant(Tensor<double>({1, u[k].size()}, std::vector<double>(u[k])));
  return out;
}

}  // namespace

TEST_CASE("squash closed forms") {
  Tape<double> t;
  CHECK(squash(t.constant(Tensor<double>::vector({0, 0, 0}))).value() == Tensor<double>::vector({0, 0, 0}));

  const auto unit = squash(t.constant(Tensor<double>::vector({0.6, 0.8}))).value();
  CHECK(unit[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(unit[1] == doctest::Approx(0.4).epsilon(1e-12));

  const auto three = squash_values(Tensor<double>::vector({0, 3, 0}));
  CHECK(three[1] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(three[0] == 0.0);
}

TEST_CASE("squash keeps direction, length below one, and gradients") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_tensor({5}, rng, -10, 10);
    const auto v = squash_values(s);
    const double ns = norm({s.values().begin(), s.values().end()});
    const double nv = norm({v.values().begin(), v.values().end()});
    CHECK(nv < 1.0);
    for (std::size_t i = 0; i < 5; ++i) CHECK(v[i] * ns == doctest::Approx(s[i] * nv).epsilon(1e-9));
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 r(seed);
    const auto rep = numerics::grad_check(
        [](Tape<double>&, std::span<const Var<double>> v) { return numerics::sum(squash(v[0])); },
        {random_tensor({6}, r)});
    CHECK(rep.max_relative_error < 1e-5);
  }
}

TEST_CASE("predict_vectors closed forms") {
  Tape<double> t;
  const auto zeros = CapsuleParams<double>::zeros(4, 3);
  std::array<Var<double>, 4> w;
  for (std::size_t k = 0; k < 4; ++k) w[k] = t.constant(zeros.transforms[k]);
  auto u1 = t.constant(Tensor<double>({1, 4}, {1, 2, 3, 4}));
  auto u2 = t.constant(Tensor<double>({1, 4}, {-1, 0, 5, 2}));
  for (const auto& u : predict_vectors<double>(u1, u2, std::span<const Var<double>, 4>(w))) {
    CHECK(u.shape() == Shape{1, 3});
    for (double x : u.value().values()) CHECK(x == 0.0);
  }

  // [I | 0] padded identity, one-hot u picks a column.
  std::mt19937_64 rng(2);
  auto padded = random_tensor({3, 4}, rng);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) padded.at(r, c) = r == c ? 1.0 : 0.0;
  }
  const auto other = random_tensor({3, 4}, rng);
  std::array<Var<double>, 4> w2{t.constant(padded), t.constant(other), t.constant(other), t.constant(padded)};
  auto e1 = t.constant(Tensor<double>({1, 4}, {0, 1, 0, 0}));
  auto e3 = t.constant(Tensor<double>({1, 4}, {0, 0, 0, 1}));
  const auto u = predict_vectors<double>(e1, e3, std::span<const Var<double>, 4>(w2));
  CHECK(u[0].value() == Tensor<double>({1, 3}, {0, 1, 0}));
  CHECK(u[3].value() == Tensor<double>({1, 3}, {0, 0, 0}));
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(u[1].value()[r] == other.at(r, 1));
    CHECK(u[2].value()[r] == other.at(r, 3));
  }

  CHECK_THROWS_AS(predict_vectors<double>(t.constant(Tensor<double>({1, 5})), u2, std::span<const Var<double>, 4>(w)),
                  numerics::DimensionError);
}

TEST_CASE("predict_vectors gradients into W_ij and u_i") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor<double>> params{random_tensor({1, 4}, rng), random_tensor({1, 4}, rng)};
    for (int k = 0; k < 4; ++k) params.push_back(random_tensor({3, 4}, rng));
    const auto rep = numerics::grad_check(
        [](Tape<double>&, std::span<const Var<double>> v) {
          const auto u = predict_vectors<double>(v[0], v[1], std::span<const Var<double>, 4>(v.subspan(2, 4)));
          auto total = weighted_sum(u[0], 1);
          for (std::size_t k = 1; k < 4; ++k) total = numerics::add(total, weighted_sum(u[k], 10 + k));
          return total;
        },
        params);
    CHECK(rep.max_relative_error < 1e-4);
  }
}

TEST_CASE("routing: first couplings uniform, r=1 closed form") {
  const std::array<Vec, 4> u{Vec{0.5, -0.2, 0.1}, Vec{0.3, 0.3, -0.6}, Vec{-0.1, 0.4, 0.2}, Vec{0.9, -0.5, 0.0}};
  Tape<double> t;
  RoutingTrace trace;
  const auto out = dynamic_routing(leaves(t, u), 1, &trace);
  REQUIRE(trace.size() == 1);
  for (double c : trace[0]) CHECK(c == 0.5);
  for (int j = 0; j < 2; ++j) {
    Vec s(3);
    for (int k = 0; k < 3; ++k) s[k] = 0.5 * (u[j][k] + u[2 + j][k]);
    const auto want = squash_ref(s);
    for (int k = 0; k < 3; ++k) CHECK(out.v[j].value()[k] == doctest::Approx(want[k]).epsilon(1e-12));
    CHECK(out.length(j) == doctest::Approx(norm(want)).epsilon(1e-12));
  }
}

TEST_CASE("routing r=2 matches a scripted trace") {
  const std::array<Vec, 4> u{Vec{1.0, 0.0, 0.5}, Vec{-0.5, 1.0, 0.0}, Vec{0.8, 0.2, 0.4}, Vec{0.0, -1.5, 1.0}};
  Tape<double> t;
  RoutingTrace trace;
  const auto out = dynamic_routing(leaves(t, u), 2, &trace);
  const auto ref = reference_routing(u, 2);
  REQUIRE(trace.size() == 2);
  for (int it = 0; it < 2; ++it) {
    for (int k = 0; k < 4; ++k) CHECK(trace[it][k] == doctest::Approx(ref.couplings[it][k]).epsilon(1e-12));
  }
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 3; ++k) CHECK(out.v[j].value()[k] == doctest::Approx(ref.v[j][k]).epsilon(1e-12));
  }
  // Frozen from an independent numpy run of the same recurrence
  // (second-iteration logits b = [[0.562465, -0.055670], [0.459972, 0.389692]]).
  CHECK(trace[1][0] == doctest::Approx(0.64979436).epsilon(1e-7));
  CHECK(trace[1][2] == doctest::Approx(0.51756277).epsilon(1e-7));
  CHECK(out.length(0) == doctest::Approx(0.58770052).epsilon(1e-7));
  CHECK(out.length(1) == doctest::Approx(0.28717646).epsilon(1e-7));
}

TEST_CASE("routing gradients through every iteration") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor<double>> params;
    for (int k = 0; k < 4; ++k) params.push_back(random_tensor({1, 4}, rng, -1, 1));
    for (int r : {1, 2, 3}) {
      const auto rep = numerics::grad_check(
          [r](Tape<double>&, std::span<const Var<double>> v) {
            PredictionVectors<double> u{v[0], v[1], v[2], v[3]};
            const auto out = dynamic_routing(u, r);
            return numerics::add(weighted_sum(out.v[0], 1), weighted_sum(out.v[1], 2));
          },
          params);
      CAPTURE(seed);
      CAPTURE(r);
      CHECK(rep.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("margin loss closed forms") {
  CHECK(margin_loss(0.95, 0.05, Label::positive) == 0.0);
  CHECK(margin_loss(0.0, 0.0, Label::positive) == doctest::Approx(0.81).epsilon(1e-12));
  CHECK(margin_loss(0.6, 0.2, Label::negative) == doctest::Approx(0.74).epsilon(1e-12));
  CHECK(margin_loss(0.05, 0.95, Label::negative) == 0.0);
  LossConfig damped;
  damped.absent_weight = 0.5;
  CHECK(margin_loss(0.6, 0.2, Label::negative, damped) == doctest::Approx(0.125 + 0.49).epsilon(1e-12));

  LossConfig bad;
  bad.m_minus = 0.95;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("margin loss: tape and closed form agree; zero exactly at the margins") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> len(0.0, 0.999);
  for (int trial = 0; trial < 500; ++trial) {
    const double l1 = len(rng), l2 = len(rng);
    for (Label y : {Label::positive, Label::negative}) {
      const double loss = margin_loss(l1, l2, y);
      CHECK(loss >= 0.0);
      const double target = y == Label::positive ? l1 : l2;
      const double other = y == Label::positive ? l2 : l1;
      CHECK((loss == 0.0) == (target >= 0.9 && other <= 0.1));
    }
  }
  Tape<double> t;
  const std::array<Vec, 4> u{Vec{1.0, 0.0}, Vec{-0.5, 1.0}, Vec{0.8, 0.2}, Vec{0.0, -1.5}};
  const auto out = dynamic_routing(leaves(t, u), 2);
  for (Label y : {Label::positive, Label::negative}) {
    CHECK(margin_loss(out, y).value()[0] == doctest::Approx(margin_loss(out.length(0), out.length(1), y)).epsilon(1e-12));
  }
}

TEST_CASE("classify rule") {
  CHECK(classify(0.8, 0.1) == Label::positive);
  CHECK(classify(0.1, 0.8) == Label::negative);
  CHECK(classify(0.5, 0.5) == Label::negative);
  // Order-preserving transforms do not change the decision.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> len(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = len(rng), b = len(rng);
    CHECK(classify(a, b) == classify(std::sqrt(a), std::sqrt(b)));
    CHECK(classify(a, b) == classify(3 * a + 1, 3 * b + 1));
  }
}

TEST_CASE("routing invariants on random prediction vectors") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 300; ++trial) {
    std::array<Vec, 4> u;
    for (auto& v : u) {
      const auto r = random_tensor({4}, rng, -3, 3);
      v.assign(r.values().begin(), r.values().end());
    }
    Tape<double> t;
    RoutingTrace trace;
    const auto out = dynamic_routing(leaves(t, u), 3, &trace);
    CHECK(trace.size() == 3);
    for (const auto& c : trace) {
      CHECK(std::abs(c[0] + c[1] - 1.0) < 1e-6);
      CHECK(std::abs(c[2] + c[3] - 1.0) < 1e-6);
    }
    CHECK(out.length(0) < 1.0);
    CHECK(out.length(1) < 1.0);
  }
}
