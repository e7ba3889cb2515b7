#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hypercaps {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

using TokenId = std::size_t;

namespace corpus {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TokenMode { word, character };

std::string_view to_string(TokenMode mode);
TokenMode parse_token_mode(std::string_view text);

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr std::string_view kPadToken = "<PAD>";
inline constexpr std::string_view kUnkToken = "<UNK>";
inline constexpr std::string_view kEosToken = "<EOS>";

// X1 is the hypernym candidate, X2 the hyponym candidate.
struct EntityPair {
  std::string hypernym;
  std::string hyponym;
  Label label = Label::negative;

  bool operator==(const EntityPair&) const = default;
};

// Parses `X1<TAB>X2<TAB>label` lines; blank and `#` lines are skipped.
std::vector<EntityPair> load_corpus(const std::filesystem::path& path);
std::vector<EntityPair> parse_corpus(std::string_view text, std::string_view source = "<memory>");
void write_corpus(const std::filesystem::path& path, std::span<const EntityPair> pairs);

// Token strings, EOS appended. Word mode lowercases ASCII letters and splits
// on whitespace; character mode yields one token per Unicode scalar and
// skips whitespace.
std::vector<std::string> tokenize(std::string_view text, TokenMode mode);

// Same as tokenize without the trailing EOS.
std::vector<std::string> tokenize_content(std::string_view text, TokenMode mode);

class Vocabulary {
 public:
  Vocabulary() : Vocabulary(TokenMode::word) {}
  explicit Vocabulary(TokenMode mode);

  // Ids after the reserved ones are assigned by descending frequency, ties
  // broken by byte-wise token order.
  static Vocabulary build(std::span<const EntityPair> training_pairs, TokenMode mode);
  // Restores a vocabulary from its id-ordered token list (reserved first).
  static Vocabulary from_tokens(std::vector<std::string> tokens, TokenMode mode);

  TokenMode mode() const { return mode_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return mode_ == other.mode_ && tokens_ == other.tokens_; }

 private:
  TokenMode mode_;
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> index_;
};

// An entity as tokens and ids; both end with EOS.
struct TokenizedEntity {
  std::vector<std::string> tokens;
  std::vector<TokenId> ids;

  std::size_t length() const { return ids.size(); }
};

TokenizedEntity encode_entity(std::string_view text, const Vocabulary& vocab);

struct EncodedPair {
  TokenizedEntity hypernym;
  TokenizedEntity hyponym;
  Label label = Label::negative;
};

std::vector<EncodedPair> encode_pairs(std::span<const EntityPair> pairs, const Vocabulary& vocab);

// Row-major [rows × cols] id matrix plus per-row true lengths.
struct PaddedSide {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<TokenId> ids;
  std::vector<std::size_t> lengths;
  // Attention weights per position, zero at padding. Filled by
  // attention::fill_batch_attention.
  std::vector<double> attention;

  TokenId at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
  std::span<const TokenId> row(std::size_t r) const {
    return std::span<const TokenId>(ids).subspan(r * cols, lengths[r]);
  }
};

struct Batch {
  std::vector<std::size_t> indices;  // positions in the encoded pair list
  PaddedSide hypernym;
  PaddedSide hyponym;
  std::vector<Label> labels;

  std::size_t size() const { return indices.size(); }
};

// Deterministically shuffled (fixed seed) batches; the last partial batch
// is kept. Each side is padded with PAD to its own per-batch maximum.
std::vector<Batch> make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size, std::uint64_t shuffle_seed,
                                bool shuffle = true);

struct SplitCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t all() const { return positive + negative; }
  bool operator==(const SplitCounts&) const = default;
};

SplitCounts count_labels(std::span<const EntityPair> pairs);

}  // namespace corpus
}  // namespace hypercaps
