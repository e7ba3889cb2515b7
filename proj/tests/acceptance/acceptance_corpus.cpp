// Acceptance checks against the published English and Chinese pair files.
// Point HYPERCAPS_CORPUS_ROOT at a checkout of the corpus repository; every
// check fails when the files are not there.
#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <random>

#include "hypercaps/baselines.hpp"
#include "hypercaps/importer.hpp"
#include "hypercaps/training.hpp"
#include "report.hpp"

using namespace hypercaps;
using acceptance::Outcome;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  std::string name;
  std::map<std::string, std::vector<corpus::EntityPair>> splits;  // train, validation, test
};

struct Data {
  std::optional<Corpus> english, chinese;
  std::string problem;
};

bool has_non_ascii(const std::vector<corpus::EntityPair>& pairs) {
  for (const auto& p : pairs) {
    for (unsigned char c : p.hypernym + p.hyponym) {
      if (c >= 0x80) return true;
    }
  }
  return false;
}

Data locate() {
  Data d;
  const char* env = std::getenv("HYPERCAPS_CORPUS_ROOT");
  if (env == nullptr || *env == '\0') {
    d.problem = "HYPERCAPS_CORPUS_ROOT is not set; published corpus files unavailable";
    return d;
  }
  if (!fs::is_directory(env)) {
    d.problem = std::string("HYPERCAPS_CORPUS_ROOT=") + env + " is not a directory";
    return d;
  }
  const auto out = fs::temp_directory_path() / "hypercaps_acceptance_corpus";
  fs::remove_all(out);
  try {
    const auto report = importer::import_corpora(env, out);
    std::map<std::string, Corpus> by_name;
    for (const auto& row : report.rows) {
      auto& c = by_name[row.corpus];
      c.name = row.corpus;
      c.splits[row.split] = corpus::load_corpus(out / row.corpus / (row.split + ".tsv"));
    }
    for (auto& [name, c] : by_name) {
      // Language by script: the Chinese corpus is written in CJK characters.
      auto& slot = has_non_ascii(c.splits["train"]) ? d.chinese : d.english;
      if (slot) {
        d.problem = "two corpora look like the same language: " + slot->name + ", " + name;
        return d;
      }
      slot = c;
    }
  } catch (const std::exception& e) {
    d.problem = std::string("import failed: ") + e.what();
  }
  return d;
}

Outcome corpus_fidelity(const Data& d) {
  if (!d.english || !d.chinese) return {false, d.problem.empty() ? "English or Chinese corpus missing" : d.problem};
  struct Row {
    const Corpus* c;
    const char* split;
    std::size_t pos, neg;
  };
  const std::array<Row, 6> table{Row{&*d.english, "train", 27872, 27872}, Row{&*d.english, "test", 9954, 9954},
                                 Row{&*d.english, "validation", 1991, 1991}, Row{&*d.chinese, "train", 8960, 8960},
                                 Row{&*d.chinese, "test", 3200, 3200}, Row{&*d.chinese, "validation", 640, 640}};
  std::string detail;
  bool ok = true;
  for (const auto& r : table) {
    const auto n = corpus::count_labels(r.c->splits.at(r.split));
    const bool match = n.positive == r.pos && n.negative == r.neg;
    ok &= match;
    detail += (detail.empty() ? "" : ", ") + r.c->name + "/" + r.split + " " + std::to_string(n.positive) + "+" +
              std::to_string(n.negative) + (match ? "" : " (expected " + std::to_string(r.pos) + "+" +
                                                             std::to_string(r.neg) + ")");
  }
  return {ok, detail};
}

Outcome baseline_reproduction(const Data& d) {
  if (!d.english) return {false, d.problem.empty() ? "English corpus missing" : d.problem};
  const auto& test = d.english->splits.at("test");
  const auto s = baselines::run_baseline(baselines::Method::string_containing, test, corpus::TokenMode::word);
  const auto t = baselines::run_baseline(baselines::Method::set_containing, test, corpus::TokenMode::word);
  auto within = [](double got, double want) { return std::abs(100 * got - want) <= 2.0; };
  const bool ok = within(s.precision, 95.20) && within(s.recall, 2.39) && within(t.precision, 94.45) &&
                  within(t.recall, 5.64) && t.recall > s.recall;
  char buf[256];
  std::snprintf(buf, sizeof buf, "string P/R %.2f/%.2f (published 95.20/2.39), set P/R %.2f/%.2f (published 94.45/5.64)",
                100 * s.precision, 100 * s.recall, 100 * t.precision, 100 * t.recall);
  return {ok, buf};
}

// Balanced sample of n pairs (n/2 per label), fixed by the seed.
std::vector<corpus::EntityPair> balanced_sample(const std::vector<corpus::EntityPair>& pairs, std::size_t n,
                                                std::uint64_t seed) {
  std::vector<corpus::EntityPair> pos, neg;
  for (const auto& p : pairs) (p.label == Label::positive ? pos : neg).push_back(p);
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  if (pos.size() < n / 2 || neg.size() < n / 2) throw std::runtime_error("not enough pairs to sample");
  std::vector<corpus::EntityPair> out(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n / 2));
  out.insert(out.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n / 2));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// Trains on the desk-scale sample for one seed and scores the test sample.
double desk_scale_f1(const Corpus& english, std::uint64_t seed, const attention::AttentionConfig& attn) {
  const auto train = balanced_sample(english.splits.at("train"), 4000, seed);
  const auto val = balanced_sample(english.splits.at("validation"), 1000, seed);
  const auto test = balanced_sample(english.splits.at("test"), 1000, seed);
  training::TrainConfig cfg;
  cfg.seed = seed;
  cfg.model.attention = attn;
  return training::evaluate(training::train(cfg, train, val).best, test).f1;
}

// Default-attention F1 per seed, shared by the two learning checks.
std::map<std::uint64_t, double> g_default_f1;

double default_f1(const Corpus& english, std::uint64_t seed) {
  auto it = g_default_f1.find(seed);
  if (it == g_default_f1.end()) it = g_default_f1.emplace(seed, desk_scale_f1(english, seed, {})).first;
  return it->second;
}

Outcome desk_learning(const Data& d) {
  if (!d.english) return {false, d.problem.empty() ? "English corpus missing" : d.problem};
  int good = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const double f1 = default_f1(*d.english, seed);
    good += f1 >= 0.80;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%sseed %llu F1 %.2f", detail.empty() ? "" : ", ",
                  static_cast<unsigned long long>(seed), 100 * f1);
    detail += buf;
  }
  return {good >= 2, detail + " (need >= 80.00 for 2 of 3)"};
}

Outcome ablation_direction(const Data& d) {
  if (!d.english) return {false, d.problem.empty() ? "English corpus missing" : d.problem};
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const double diff = default_f1(*d.english, seed);
    const double equal = desk_scale_f1(*d.english, seed, attention::named_variant("equal"));
    wins += diff >= equal;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%sseed %llu difference %.2f vs equal %.2f", detail.empty() ? "" : ", ",
                  static_cast<unsigned long long>(seed), 100 * diff, 100 * equal);
    detail += buf;
  }
  return {wins >= 2, detail + " (need difference >= equal for 2 of 3)"};
}

}  // namespace

int main() {
  const auto data = locate();
  bool ok = true;
  ok &= acceptance::check(4, "corpus fidelity", 300, [&] { return corpus_fidelity(data); });
  ok &= acceptance::check(5, "baseline reproduction", 60, [&] { return baseline_reproduction(data); });
  ok &= acceptance::check(7, "desk-scale learning", 1800, [&] { return desk_learning(data); });
  ok &= acceptance::check(8, "ablation direction", 3600, [&] { return ablation_direction(data); });
  return ok ? 0 : 1;
}
