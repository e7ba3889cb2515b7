#include "hypercaps/attention.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hypercaps::attention {

AttentionConfig parse_attention(std::string_view text) {
  std::vector<std::string> parts;
  std::stringstream ss{std::string(text)};
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  if (parts.size() < 2 || parts.size() > 3) {
    throw std::invalid_argument("attention must be 'a,b' or 'a,b,softmax', got '" + std::string(text) + "'");
  }
  AttentionConfig cfg;
  try {
    std::size_t used = 0;
    cfg.a = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument(parts[0]);
    cfg.b = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("attention coefficients must be numbers, got '" + std::string(text) + "'");
  }
  if (parts.size() == 3) {
    if (parts[2] != "softmax") {
      throw std::invalid_argument("third attention field must be 'softmax', got '" + parts[2] + "'");
    }
    cfg.apply_softmax = true;
  }
  return cfg;
}

std::string format_attention(const AttentionConfig& cfg) {
  std::ostringstream os;
  os << cfg.a << ',' << cfg.b;
  if (cfg.apply_softmax) os << ",softmax";
  return os.str();
}

AttentionConfig named_variant(std::string_view name) {
  if (name == "difference") return {1.0, 0.0, false};
  if (name == "difference-x10") return {10.0, 0.0, false};
  if (name == "difference-softmax") return {1.0, 0.0, true};
  if (name == "equal") return {0.0, 1.0, false};
  throw std::invalid_argument("unknown attention variant '" + std::string(name) + "'");
}

std::vector<std::string> variant_names() { return {"difference", "difference-x10", "difference-softmax", "equal"}; }

template <typename Token>
LcsMasks lcs_membership(std::span<const Token> first, std::span<const Token> second) {
  const std::size_t n = first.size(), m = second.size();
  // table[i][j] = LCS length of first[0, i) and second[0, j)
  std::vector<std::size_t> table((n + 1) * (m + 1), 0);
  const auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return table[i * (m + 1) + j]; };
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = first[i - 1] == second[j - 1] ? at(i - 1, j - 1) + 1 : std::max(at(i - 1, j), at(i, j - 1));
    }
  }
  LcsMasks masks;
  masks.first.assign(n, 1);
  masks.second.assign(m, 1);
  masks.lcs_length = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    if (first[i - 1] == second[j - 1]) {
      masks.first[i - 1] = 0;
      masks.second[j - 1] = 0;
      --i;
      --j;
    } else if (at(i, j - 1) >= at(i - 1, j)) {
      --j;
    } else {
      --i;
    }
  }
  return masks;
}

template LcsMasks lcs_membership<std::string>(std::span<const std::string>, std::span<const std::string>);
template LcsMasks lcs_membership<TokenId>(std::span<const TokenId>, std::span<const TokenId>);

std::vector<std::uint8_t> with_eos(std::span<const std::uint8_t> mask) {
  std::vector<std::uint8_t> out(mask.begin(), mask.end());
  out.push_back(1);
  return out;
}

LcsMasks pair_masks(std::span<const std::string> first_with_eos, std::span<const std::string> second_with_eos) {
  if (first_with_eos.empty() || second_with_eos.empty()) {
    throw std::invalid_argument("pair_masks: entities must contain at least the EOS token");
  }
  auto masks = lcs_membership<std::string>(first_with_eos.first(first_with_eos.size() - 1),
                                           second_with_eos.first(second_with_eos.size() - 1));
  masks.first = with_eos(masks.first);
  masks.second = with_eos(masks.second);
  return masks;
}

std::vector<double> attention_weights(std::span<const std::uint8_t> mask, const AttentionConfig& cfg) {
  std::vector<double> alpha;
  alpha.reserve(mask.size());
  for (auto w : mask) alpha.push_back(cfg.a * static_cast<double>(w) + cfg.b);
  if (cfg.apply_softmax && !alpha.empty()) {
    double mx = alpha.front();
    for (double v : alpha) mx = std::max(mx, v);
    double total = 0.0;
    for (double& v : alpha) total += (v = std::exp(v - mx));
    for (double& v : alpha) v /= total;
  }
  return alpha;
}

template <typename T>
Var<T> attention_weights(numerics::Tape<T>& tape, std::span<const std::uint8_t> mask, Var<T> a, Var<T> b,
                         bool apply_softmax) {
  using namespace numerics;
  Tensor<T> w({1, mask.size()});
  for (std::size_t i = 0; i < mask.size(); ++i) w[i] = static_cast<T>(mask[i]);
  auto alpha = shift_by(scale_by(tape.constant(std::move(w)), a), b);
  return apply_softmax ? softmax(alpha, 1) : alpha;
}

template <typename T>
Var<T> entity_vector(Var<T> context, Var<T> alpha) {
  const auto& c = context.value();
  const auto& a = alpha.value();
  if (c.rank() != 2 || a.size() != c.rows()) {
    throw numerics::DimensionError("entity_vector: " + std::to_string(a.size()) + " weights for context " +
                                   numerics::shape_to_string(c.shape()));
  }
  auto weights = alpha;
  if (a.rank() != 2 || a.rows() != 1) {
    weights = numerics::stack_rows<T>(std::vector<Var<T>>{alpha});
  }
  return numerics::matmul(weights, context);
}

void fill_batch_attention(corpus::Batch& batch, std::span<const corpus::EncodedPair> pairs, const AttentionConfig& cfg) {
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& pair = pairs[batch.indices[r]];
    const auto masks = pair_masks(pair.hypernym.tokens, pair.hyponym.tokens);
    const auto alpha1 = attention_weights(masks.first, cfg);
    const auto alpha2 = attention_weights(masks.second, cfg);
    std::copy(alpha1.begin(), alpha1.end(), batch.hypernym.attention.begin() + static_cast<std::ptrdiff_t>(r * batch.hypernym.cols));
    std::copy(alpha2.begin(), alpha2.end(), batch.hyponym.attention.begin() + static_cast<std::ptrdiff_t>(r * batch.hyponym.cols));
  }
}

#define HYPERCAPS_INSTANTIATE_ATTENTION(T)                                                                  \
  template Var<T> attention_weights(numerics::Tape<T>&, std::span<const std::uint8_t>, Var<T>, Var<T>, bool); \
  template Var<T> entity_vector(Var<T>, Var<T>);

HYPERCAPS_INSTANTIATE_ATTENTION(float)
HYPERCAPS_INSTANTIATE_ATTENTION(double)

}  // namespace hypercaps::attention
