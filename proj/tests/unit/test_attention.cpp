#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>

#include "helpers.hpp"
#include "hypercaps/attention.hpp"

using namespace hypercaps;
using namespace hypercaps::attention;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

using Mask = std::vector<std::uint8_t>;
using Tokens = std::vector<std::string>;

LcsMasks masks_of(const Tokens& a, const Tokens& b) {
  return lcs_membership<std::string>(std::span<const std::string>(a), std::span<const std::string>(b));
}

// Plain recursive LCS length, independent of the library's table.
std::size_t reference_lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    if (memo[i][j] >= 0) return static_cast<std::size_t>(memo[i][j]);
    std::size_t best = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    memo[i][j] = static_cast<long>(best);
    return best;
  };
  return go(0, 0);
}

// Zero positions on each side, read in order, spell the same sequence.
bool is_common_alignment(const Tokens& a, const Tokens& b, const LcsMasks& m) {
  Tokens sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (m.first[i] == 0) sa.push_back(a[i]);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (m.second[j] == 0) sb.push_back(b[j]);
  }
  return sa == sb;
}

// Number of distinct position sets (first side, second side) realising a maximal common subsequence.
std::size_t count_max_alignments(const Tokens& a, const Tokens& b) {
  const std::size_t L = reference_lcs(a, b);
  std::size_t count = 0;
  for (unsigned ma = 0; ma < (1u << a.size()); ++ma) {
    if (static_cast<std::size_t>(__builtin_popcount(ma)) != L) continue;
    for (unsigned mb = 0; mb < (1u << b.size()); ++mb) {
      if (static_cast<std::size_t>(__builtin_popcount(mb)) != L) continue;
      LcsMasks m;
      m.first.assign(a.size(), 1);
      m.second.assign(b.size(), 1);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (ma >> i & 1u) m.first[i] = 0;
      }
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (mb >> j & 1u) m.second[j] = 0;
      }
      if (is_common_alignment(a, b, m)) ++count;
    }
  }
  return count;
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, int symbols) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<int> sym(0, symbols - 1);
  Tokens out(len(rng));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + sym(rng)));
  return out;
}

}  // namespace

TEST_CASE("lcs_membership examples") {
  auto m = masks_of({"head", "pain"}, {"severe", "head", "pain"});
  CHECK(with_eos(m.first) == Mask{0, 0, 1});
  CHECK(with_eos(m.second) == Mask{1, 0, 0, 1});
  CHECK(m.lcs_length == 2);

  auto same = masks_of({"a", "b", "c"}, {"a", "b", "c"});
  CHECK(same.first == Mask{0, 0, 0});
  CHECK(same.second == Mask{0, 0, 0});

  auto disjoint = masks_of({"a", "b"}, {"c", "d", "e"});
  CHECK(disjoint.first == Mask{1, 1});
  CHECK(disjoint.second == Mask{1, 1, 1});
  CHECK(disjoint.lcs_length == 0);
}

TEST_CASE("backtrace tie rule: match first, then step back in the second sequence") {
  // Two maximal alignments; the rule keeps the later 'a' of the second sequence.
  auto m = masks_of({"a"}, {"a", "a"});
  CHECK(m.second == Mask{1, 0});
  // x y vs y x: the rule moves along the second sequence and matches y.
  auto c = masks_of({"x", "y"}, {"y", "x"});
  CHECK(c.first == Mask{1, 0});
  CHECK(c.second == Mask{0, 1});
}

TEST_CASE("pair_masks gives EOS weight 1 on both sides") {
  const Tokens a{"pain", "<EOS>"}, b{"head", "pain", "<EOS>"};
  const auto m = pair_masks(a, b);
  CHECK(m.first == Mask{0, 1});
  CHECK(m.second == Mask{1, 0, 1});
  const Tokens same{"pain", "<EOS>"};
  const auto s = pair_masks(same, same);
  CHECK(s.first == Mask{0, 1});
}

TEST_CASE("attention_weights closed forms") {
  const Mask w{1, 0, 1};
  CHECK(attention_weights(w, AttentionConfig{1, 0, false}) == std::vector<double>{1, 0, 1});
  CHECK(attention_weights(w, AttentionConfig{0, 1, false}) == std::vector<double>{1, 1, 1});
  CHECK(attention_weights(w, AttentionConfig{10, 0, false}) == std::vector<double>{10, 0, 10});
  const double e = std::exp(1.0);
  const auto s = attention_weights(w, AttentionConfig{1, 0, true});
  CHECK(s[0] == doctest::Approx(e / (2 * e + 1)).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(1 / (2 * e + 1)).epsilon(1e-12));
  CHECK(s[2] == doctest::Approx(e / (2 * e + 1)).epsilon(1e-12));

  Tape<double> t;
  const auto v = attention_weights<double>(t, w, t.constant(Tensor<double>::scalar(1.0)),
                                           t.constant(Tensor<double>::scalar(0.0)), true);
  for (std::size_t i = 0; i < 3; ++i) CHECK(v.value()[i] == doctest::Approx(s[i]).epsilon(1e-12));
}

TEST_CASE("attention config parsing and named variants") {
  CHECK(parse_attention("1,0") == AttentionConfig{1, 0, false});
  CHECK(parse_attention("0,1") == AttentionConfig{0, 1, false});
  CHECK(parse_attention("1,0,softmax") == AttentionConfig{1, 0, true});
  CHECK(parse_attention(format_attention(AttentionConfig{10, 0, false})) == AttentionConfig{10, 0, false});
  CHECK_THROWS(parse_attention("1"));
  CHECK_THROWS(parse_attention("1,0,max"));
  CHECK_THROWS(parse_attention("a,b"));
  CHECK(named_variant("difference") == AttentionConfig{1, 0, false});
  CHECK(named_variant("difference-x10") == AttentionConfig{10, 0, false});
  CHECK(named_variant("difference-softmax") == AttentionConfig{1, 0, true});
  CHECK(named_variant("equal") == AttentionConfig{0, 1, false});
  CHECK(variant_names().size() == 4);
}

TEST_CASE("entity_vector: one-hot at EOS, equal attention, length mismatch") {
  std::mt19937_64 rng(3);
  const auto ctx = random_tensor({3, 4}, rng);
  Tape<double> t;
  auto c = t.constant(ctx);
  auto eos_only = entity_vector(c, t.constant(Tensor<double>({1, 3}, {0, 0, 1})));
  for (std::size_t k = 0; k < 4; ++k) CHECK(eos_only.value()[k] == ctx.at(2, k));

  // Identical entities under the default config: only EOS is weighted.
  const Tokens same{"head", "pain", "<EOS>"};
  const auto m = pair_masks(same, same);
  const auto alpha = attention_weights(m.first, AttentionConfig{});
  CHECK(alpha == std::vector<double>{0, 0, 1});

  auto equal = entity_vector(c, t.constant(Tensor<double>({1, 3}, {1, 1, 1})));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(equal.value()[k] == doctest::Approx(ctx.at(0, k) + ctx.at(1, k) + ctx.at(2, k)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(entity_vector(c, t.constant(Tensor<double>({1, 2}))), numerics::DimensionError);
}

TEST_CASE("entity_vector gradients through context and a, b") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    std::mt19937_64 rng(seed);
    const Mask w{1, 0, 0, 1};
    for (bool softmax : {false, true}) {
      const auto rep = numerics::grad_check(
          [&](Tape<double>& t, std::span<const Var<double>> v) {
            return weighted_sum(entity_vector(v[0], attention_weights<double>(t, w, v[1], v[2], softmax)));
          },
          {random_tensor({4, 3}, rng), Tensor<double>::scalar(1.3), Tensor<double>::scalar(-0.4)});
      CAPTURE(seed);
      CHECK(rep.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("LCS properties over random token sequences") {
  std::mt19937_64 rng(21);
  std::size_t exact_swaps = 0, unique_cases = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_tokens(rng, 6, 3);
    const auto b = random_tokens(rng, 6, 3);
    const auto m = masks_of(a, b);
    CAPTURE(trial);
    CHECK(m.lcs_length == reference_lcs(a, b));
    CHECK(static_cast<std::size_t>(std::count(m.first.begin(), m.first.end(), 0)) == m.lcs_length);
    CHECK(static_cast<std::size_t>(std::count(m.second.begin(), m.second.end(), 0)) == m.lcs_length);
    CHECK(is_common_alignment(a, b, m));

    // Swapping the inputs yields a maximal alignment of the same length;
    // it is exactly the swapped mask pair whenever that alignment is unique.
    const auto s = masks_of(b, a);
    CHECK(s.lcs_length == m.lcs_length);
    CHECK(is_common_alignment(b, a, s));
    if (count_max_alignments(a, b) == 1) {
      ++unique_cases;
      CHECK(s.first == m.second);
      CHECK(s.second == m.first);
      exact_swaps += s.first == m.second && s.second == m.first;
    }
  }
  CHECK(unique_cases > 100);
  CHECK(exact_swaps == unique_cases);
}

TEST_CASE("batch attention: zero at padding, EOS weight kept") {
  const std::vector<corpus::EntityPair> pairs{{"pain", "head pain", Label::positive},
                                              {"severe head pain", "pain", Label::negative}};
  const auto vocab = corpus::Vocabulary::build(pairs, corpus::TokenMode::word);
  const auto enc = corpus::encode_pairs(pairs, vocab);
  auto batch = corpus::make_batches(enc, 2, 1, false)[0];
  fill_batch_attention(batch, enc, AttentionConfig{});
  // Row 0 hypernym: pain EOS PAD PAD
  CHECK(batch.hypernym.attention[0] == 0.0);
  CHECK(batch.hypernym.attention[1] == 1.0);
  CHECK(batch.hypernym.attention[2] == 0.0);
  CHECK(batch.hypernym.attention[3] == 0.0);
  // Row 1 hypernym: severe head pain EOS
  CHECK(std::vector<double>(batch.hypernym.attention.begin() + 4, batch.hypernym.attention.end()) ==
        std::vector<double>{1, 1, 0, 1});
  fill_batch_attention(batch, enc, AttentionConfig{0, 1, false});
  CHECK(batch.hypernym.attention[2] == 0.0);
  CHECK(batch.hypernym.attention[1] == 1.0);
}
