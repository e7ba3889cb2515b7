#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "hypercaps/corpus.hpp"

using namespace hypercaps;
using namespace hypercaps::corpus;

namespace {

std::vector<std::string> strs(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

std::vector<EntityPair> numbered_pairs(std::size_t n) {
  std::vector<EntityPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"w" + std::to_string(i), "x w" + std::to_string(i), i % 2 ? Label::positive : Label::negative});
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize examples") {
  CHECK(tokenize("severe head pain", TokenMode::word) == strs({"severe", "head", "pain", "<EOS>"}));
  CHECK(tokenize("头痛", TokenMode::character) == strs({"头", "痛", "<EOS>"}));
  CHECK(tokenize("Pain", TokenMode::word) == strs({"pain", "<EOS>"}));
  CHECK(tokenize("  head\tpain ", TokenMode::word) == strs({"head", "pain", "<EOS>"}));
  CHECK(tokenize("头 痛", TokenMode::character) == strs({"头", "痛", "<EOS>"}));
  CHECK_THROWS_AS(tokenize("   ", TokenMode::word), CorpusError);
  CHECK_THROWS_AS(tokenize("", TokenMode::character), CorpusError);
}

TEST_CASE("parse_corpus: lines, comments, errors") {
  const auto pairs = parse_corpus("# header\npain\thead pain\t1\n\nhead pain\tpain\t0\n");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == EntityPair{"pain", "head pain", Label::positive});
  CHECK(pairs[1].label == Label::negative);
  CHECK(parse_corpus("").empty());

  try {
    parse_corpus("a\tb\t1\nbroken line\n", "x.tsv");
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("x.tsv:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_corpus("a\tb\t2\n"), CorpusError);
  CHECK_THROWS_AS(parse_corpus("a\t \t1\n"), CorpusError);
}

TEST_CASE("load/write round trip and empty file") {
  const auto dir = std::filesystem::temp_directory_path() / "hypercaps_corpus_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "pairs.tsv";
  const std::vector<EntityPair> pairs{{"头痛", "剧烈头痛", Label::positive}, {"fever", "cough", Label::negative}};
  write_corpus(path, pairs);
  CHECK(load_corpus(path) == pairs);

  std::ofstream(dir / "empty.tsv").close();
  CHECK(load_corpus(dir / "empty.tsv").empty());
  CHECK_THROWS_AS(load_corpus(dir / "missing.tsv"), CorpusError);
}

TEST_CASE("vocabulary build") {
  const std::vector<EntityPair> pairs{{"a b", "b c", Label::positive}};
  const auto v = Vocabulary::build(pairs, TokenMode::word);
  CHECK(v.size() == 6);
  CHECK(v.id("<PAD>") == kPadId);
  CHECK(v.id("<UNK>") == kUnkId);
  CHECK(v.id("<EOS>") == kEosId);
  // b occurs twice, then a and c by byte order
  CHECK(v.tokens() == strs({"<PAD>", "<UNK>", "<EOS>", "b", "a", "c"}));
  CHECK(v.id("zebra") == kUnkId);
  CHECK(Vocabulary::build(pairs, TokenMode::word) == v);
  CHECK(Vocabulary::from_tokens(v.tokens(), TokenMode::word) == v);
}

TEST_CASE("encode/decode round trip and unseen tokens") {
  const std::vector<EntityPair> train{{"severe head pain", "head pain", Label::negative}};
  const auto v = Vocabulary::build(train, TokenMode::word);
  const auto tokens = strs({"head", "severe", "pain", "<EOS>"});
  CHECK(v.decode(v.encode(tokens)) == tokens);

  const auto e = encode_entity("chronic head pain", v);
  CHECK(e.ids.front() == kUnkId);
  CHECK(e.ids.back() == kEosId);
  CHECK(e.tokens.front() == "chronic");
  for (auto id : e.ids) CHECK(id < v.size());
}

TEST_CASE("test tokens never enter the vocabulary") {
  const std::vector<EntityPair> train{{"pain", "head pain", Label::positive}};
  const auto v = Vocabulary::build(train, TokenMode::word);
  const std::vector<EntityPair> test{{"fracture", "hip fracture", Label::positive}};
  const auto encoded = encode_pairs(test, v);
  CHECK_FALSE(v.contains("fracture"));
  CHECK(encoded[0].hyponym.ids == std::vector<TokenId>{kUnkId, kUnkId, kEosId});
}

TEST_CASE("make_batches sizes, determinism and padding") {
  const auto pairs = numbered_pairs(300);
  const auto v = Vocabulary::build(pairs, TokenMode::word);
  const auto enc = encode_pairs(pairs, v);
  const auto batches = make_batches(enc, 128, 42);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 128);
  CHECK(batches[1].size() == 128);
  CHECK(batches[2].size() == 44);

  const auto again = make_batches(enc, 128, 42);
  for (std::size_t b = 0; b < 3; ++b) CHECK(again[b].indices == batches[b].indices);
  CHECK(make_batches(enc, 128, 43)[0].indices != batches[0].indices);

  std::vector<bool> seen(300, false);
  for (const auto& b : batches) {
    for (auto i : b.indices) seen[i] = true;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool s) { return s; }));
  CHECK_THROWS(make_batches(enc, 0, 1));
}

TEST_CASE("shorter row padded with PAD ids") {
  const std::vector<EntityPair> pairs{{"a", "x", Label::positive}, {"a b c d", "x", Label::negative}};
  const auto v = Vocabulary::build(pairs, TokenMode::word);
  const auto enc = encode_pairs(pairs, v);
  const auto b = make_batches(enc, 2, 1, false)[0];
  CHECK(b.hypernym.cols == 5);
  CHECK(b.hypernym.lengths == std::vector<std::size_t>{2, 5});
  for (std::size_t c = 2; c < 5; ++c) CHECK(b.hypernym.at(0, c) == kPadId);
  CHECK(b.hypernym.at(0, 1) == kEosId);
}

TEST_CASE("label counts") {
  const auto c = count_labels(numbered_pairs(9));
  CHECK(c.positive == 4);
  CHECK(c.negative == 5);
  CHECK(c.all() == 9);
}
