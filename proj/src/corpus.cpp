#include "hypercaps/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace hypercaps::corpus {

namespace {

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

// Splits UTF-8 text into encoded scalars. Throws on malformed input.
std::vector<std::pair<char32_t, std::string_view>> utf8_scalars(std::string_view text) {
  std::vector<std::pair<char32_t, std::string_view>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      len = 1;
      cp = lead;
    } else if ((lead >> 5) == 0x6) {
      len = 2;
      cp = lead & 0x1F;
    } else if ((lead >> 4) == 0xE) {
      len = 3;
      cp = lead & 0x0F;
    } else if ((lead >> 3) == 0x1E) {
      len = 4;
      cp = lead & 0x07;
    } else {
      throw CorpusError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) throw CorpusError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont >> 6) != 0x2) throw CorpusError("invalid UTF-8 continuation byte at offset " + std::to_string(i + k));
      cp = (cp << 6) | (cont & 0x3F);
    }
    out.emplace_back(cp, text.substr(i, len));
    i += len;
  }
  return out;
}

bool is_unicode_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' || cp == U'\v' || cp == 0x00A0 ||
         cp == 0x3000;
}

}  // namespace

std::string_view to_string(TokenMode mode) { return mode == TokenMode::word ? "word" : "character"; }

TokenMode parse_token_mode(std::string_view text) {
  if (text == "word") return TokenMode::word;
  if (text == "character" || text == "char") return TokenMode::character;
  throw std::invalid_argument("unknown token mode '" + std::string(text) + "' (expected word or character)");
}

std::vector<EntityPair> parse_corpus(std::string_view text, std::string_view source) {
  std::vector<EntityPair> pairs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line).front() == '#') continue;

    const auto where = [&] { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw CorpusError(where() + "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    EntityPair pair;
    pair.hypernym = std::string(trim(fields[0]));
    pair.hyponym = std::string(trim(fields[1]));
    if (pair.hypernym.empty() || pair.hyponym.empty()) throw CorpusError(where() + "empty entity text");
    const auto label = trim(fields[2]);
    if (label == "1") {
      pair.label = Label::positive;
    } else if (label == "0") {
      pair.label = Label::negative;
    } else {
      throw CorpusError(where() + "unknown label '" + std::string(label) + "' (expected 0 or 1)");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<EntityPair> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), path.string());
}

void write_corpus(const std::filesystem::path& path, std::span<const EntityPair> pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  for (const auto& p : pairs) {
    out << p.hypernym << '\t' << p.hyponym << '\t' << (p.label == Label::positive ? '1' : '0') << '\n';
  }
}

std::vector<std::string> tokenize_content(std::string_view text, TokenMode mode) {
  std::vector<std::string> tokens;
  if (mode == TokenMode::word) {
    std::string current;
    for (char c : text) {
      if (is_ascii_space(c)) {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
      } else {
        current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
      }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
  } else {
    for (const auto& [cp, bytes] : utf8_scalars(text)) {
      if (!is_unicode_space(cp)) tokens.emplace_back(bytes);
    }
  }
  if (tokens.empty()) throw CorpusError("entity text is empty after trimming");
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text, TokenMode mode) {
  auto tokens = tokenize_content(text, mode);
  tokens.emplace_back(kEosToken);
  return tokens;
}

Vocabulary::Vocabulary(TokenMode mode) : mode_(mode) {
  for (auto t : {kPadToken, kUnkToken, kEosToken}) {
    index_.emplace(std::string(t), tokens_.size());
    tokens_.emplace_back(t);
  }
}

Vocabulary Vocabulary::build(std::span<const EntityPair> training_pairs, TokenMode mode) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& p : training_pairs) {
    for (const auto* text : {&p.hypernym, &p.hyponym}) {
      for (auto& tok : tokenize_content(*text, mode)) ++freq[std::move(tok)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab(mode);
  for (auto& [tok, count] : entries) {
    if (vocab.contains(tok)) continue;
    vocab.index_.emplace(tok, vocab.tokens_.size());
    vocab.tokens_.push_back(std::move(tok));
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, TokenMode mode) {
  Vocabulary vocab(mode);
  if (tokens.size() < 3 || tokens[kPadId] != kPadToken || tokens[kUnkId] != kUnkToken || tokens[kEosId] != kEosToken) {
    throw CorpusError("vocabulary token list must start with the reserved PAD, UNK, EOS entries");
  }
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    if (!vocab.index_.emplace(tokens[i], vocab.tokens_.size()).second) {
      throw CorpusError("duplicate vocabulary entry '" + tokens[i] + "'");
    }
    vocab.tokens_.push_back(std::move(tokens[i]));
  }
  return vocab;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw CorpusError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(token(id));
  return out;
}

TokenizedEntity encode_entity(std::string_view text, const Vocabulary& vocab) {
  TokenizedEntity e;
  e.tokens = tokenize(text, vocab.mode());
  e.ids = vocab.encode(e.tokens);
  return e;
}

std::vector<EncodedPair> encode_pairs(std::span<const EntityPair> pairs, const Vocabulary& vocab) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({encode_entity(p.hypernym, vocab), encode_entity(p.hyponym, vocab), p.label});
  }
  return out;
}

namespace {

PaddedSide pad_side(std::span<const EncodedPair> pairs, std::span<const std::size_t> indices,
                    const TokenizedEntity EncodedPair::*side) {
  PaddedSide out;
  out.rows = indices.size();
  for (auto i : indices) out.cols = std::max(out.cols, (pairs[i].*side).length());
  out.ids.assign(out.rows * out.cols, kPadId);
  out.attention.assign(out.rows * out.cols, 0.0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& ids = (pairs[indices[r]].*side).ids;
    std::copy(ids.begin(), ids.end(), out.ids.begin() + static_cast<std::ptrdiff_t>(r * out.cols));
    out.lengths.push_back(ids.size());
  }
  return out;
}

}  // namespace

std::vector<Batch> make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size, std::uint64_t shuffle_seed,
                                bool shuffle) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    b.hypernym = pad_side(pairs, b.indices, &EncodedPair::hypernym);
    b.hyponym = pad_side(pairs, b.indices, &EncodedPair::hyponym);
    for (auto i : b.indices) b.labels.push_back(pairs[i].label);
    batches.push_back(std::move(b));
  }
  return batches;
}

SplitCounts count_labels(std::span<const EntityPair> pairs) {
  SplitCounts c;
  for (const auto& p : pairs) (p.label == Label::positive ? c.positive : c.negative)++;
  return c;
}

}  // namespace hypercaps::corpus
