#include "hypercaps/model_check.hpp"

#include <random>

#include "hypercaps/model.hpp"

namespace hypercaps::model {

namespace {

corpus::TokenizedEntity random_entity(std::mt19937_64& rng, const ModelCheckConfig& cfg) {
  std::uniform_int_distribution<std::size_t> length(1, cfg.max_length - 1);
  std::uniform_int_distribution<std::size_t> symbol(0, cfg.symbols - 1);
  corpus::TokenizedEntity e;
  const auto n = length(rng);
  for (std::size_t t = 0; t < n; ++t) {
    const auto s = symbol(rng);
    e.tokens.push_back("s" + std::to_string(s));
    e.ids.push_back(corpus::kEosId + 1 + s);
  }
  e.tokens.emplace_back(corpus::kEosToken);
  e.ids.push_back(corpus::kEosId);
  return e;
}

}  // namespace

ModelCheckResult model_grad_check(const ModelCheckConfig& cfg, std::uint64_t seed) {
  if (cfg.max_length < 2) throw std::invalid_argument("max_length must leave room for one token and EOS");
  if (cfg.symbols == 0) throw std::invalid_argument("symbols must be positive");

  ModelConfig mc;
  mc.vocab_size = corpus::kEosId + 1 + cfg.symbols;
  mc.embed_dim = cfg.embed_dim;
  mc.hidden_dim = cfg.hidden_dim;
  mc.capsule_dim = cfg.capsule_dim;
  mc.routing_iterations = cfg.routing_iterations;
  mc.attention.apply_softmax = cfg.softmax_attention;
  mc.attention.trainable = true;
  mc.validate();

  std::mt19937_64 rng(seed);
  auto params = ModelParams<double>::initialize(mc, seed);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (auto& [name, t] : params.named()) {
    if (name == "attention.a" || name == "attention.b") continue;
    for (auto& v : t->values()) v = coord(rng);
  }
  params.embedding.row(corpus::kPadId)[0] = 0.0;

  corpus::EncodedPair pair;
  pair.hypernym = random_entity(rng, cfg);
  pair.hyponym = random_entity(rng, cfg);
  pair.label = std::bernoulli_distribution(0.5)(rng) ? Label::positive : Label::negative;

  std::vector<numerics::Tensor<double>> leaves;
  std::vector<std::string> names;
  for (const auto& [name, t] : params.named()) {
    leaves.push_back(*t);
    names.push_back(name);
  }

  const numerics::ScalarFunction f = [&](numerics::Tape<double>&, std::span<const Var<double>> v) {
    ModelBinding<double> b;
    std::size_t k = 0;
    b.embedding = v[k++];
    for (auto* g : {&b.forward, &b.backward}) {
      g->w_reset = v[k++];
      g->w_update = v[k++];
      g->w_candidate = v[k++];
      g->u_reset = v[k++];
      g->u_update = v[k++];
      g->u_candidate = v[k++];
    }
    for (auto& w : b.transforms) w = v[k++];
    b.attention_a = v[k++];
    b.attention_b = v[k++];
    return forward_pair(b, pair, mc, true).loss;
  };

  ModelCheckResult result;
  result.seed = seed;
  result.report = numerics::grad_check(f, std::move(leaves), cfg.eps);
  result.worst_param = names.at(result.report.worst_param);
  return result;
}

}  // namespace hypercaps::model
