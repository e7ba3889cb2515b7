#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypercaps/corpus.hpp"
#include "hypercaps/numerics/ops.hpp"

namespace hypercaps::attention {

using numerics::Var;

// alpha_i = a * w_i + b, optionally softmax-normalised over the entity.
struct AttentionConfig {
  double a = 1.0;
  double b = 0.0;
  bool apply_softmax = false;
  // Train a and b as network parameters instead of fixed constants.
  bool trainable = false;

  bool operator==(const AttentionConfig&) const = default;
};

// Parses "a,b" or "a,b,softmax".
AttentionConfig parse_attention(std::string_view text);
std::string format_attention(const AttentionConfig& cfg);

// The four schemes compared in the ablation, by name:
// difference (1,0), difference-x10 (10,0), difference-softmax (1,0,softmax),
// equal (0,1).
AttentionConfig named_variant(std::string_view name);
std::vector<std::string> variant_names();

// w_i per position: 0 on the chosen longest-common-subsequence alignment, 1
// elsewhere. Inputs exclude EOS.
struct LcsMasks {
  std::vector<std::uint8_t> first;
  std::vector<std::uint8_t> second;
  std::size_t lcs_length = 0;
};

// Backtrace ties: a match is taken whenever the tokens agree; otherwise the
// step that decreases the second sequence's index is preferred.
template <typename Token>
LcsMasks lcs_membership(std::span<const Token> first, std::span<const Token> second);

// Appends the EOS weight of 1.
std::vector<std::uint8_t> with_eos(std::span<const std::uint8_t> mask);

// Masks for two full token sequences (both ending with EOS); the LCS is
// computed without the EOS positions and EOS gets weight 1.
LcsMasks pair_masks(std::span<const std::string> first_with_eos, std::span<const std::string> second_with_eos);

std::vector<double> attention_weights(std::span<const std::uint8_t> mask, const AttentionConfig& cfg);

// Differentiable alpha = a·w + b (then softmax if requested), shape [1 × T].
template <typename T>
Var<T> attention_weights(numerics::Tape<T>& tape, std::span<const std::uint8_t> mask, Var<T> a, Var<T> b,
                         bool apply_softmax);

// h = Σ alpha_i · context_i for context [T × width], alpha [1 × T].
template <typename T>
Var<T> entity_vector(Var<T> context, Var<T> alpha);

// Fills the attention fields of a batch from the encoded pairs.
void fill_batch_attention(corpus::Batch& batch, std::span<const corpus::EncodedPair> pairs, const AttentionConfig& cfg);

}  // namespace hypercaps::attention
