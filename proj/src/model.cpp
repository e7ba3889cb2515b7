#include "hypercaps/model.hpp"

#include <random>
#include <stdexcept>

namespace hypercaps::model {

void ModelConfig::validate() const {
  if (vocab_size < 3) throw std::invalid_argument("vocabulary must contain the reserved PAD, UNK, EOS entries");
  if (embed_dim == 0 || hidden_dim == 0 || capsule_dim == 0) {
    throw std::invalid_argument("embedding, hidden and capsule dimensions must be positive");
  }
  if (routing_iterations < 1) throw std::invalid_argument("routing iterations must be at least 1");
  loss.validate();
}

template <typename T>
ModelParams<T> ModelParams<T>::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.embedding = Tensor<T>({cfg.vocab_size, cfg.embed_dim});
  std::uniform_real_distribution<double> emb(-0.05, 0.05);
  for (std::size_t r = 0; r < cfg.vocab_size; ++r) {
    for (auto& v : p.embedding.row(r)) v = r == corpus::kPadId ? T{0} : static_cast<T>(emb(rng));
  }
  p.forward = encoder::GruParams<T>::glorot(cfg.embed_dim, cfg.hidden_dim, rng);
  p.backward = encoder::GruParams<T>::glorot(cfg.embed_dim, cfg.hidden_dim, rng);
  p.capsules = capsnet::CapsuleParams<T>::glorot(cfg.entity_dim(), cfg.capsule_dim, rng);
  p.attention_a = Tensor<T>::scalar(static_cast<T>(cfg.attention.a));
  p.attention_b = Tensor<T>::scalar(static_cast<T>(cfg.attention.b));
  return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like(const ModelParams& other) {
  ModelParams p = other;
  for (auto& [name, t] : p.named()) t->fill(T{0});
  return p;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::named() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  out.emplace_back("embedding", &embedding);
  for (auto [prefix, gru] : {std::pair{"gru.forward.", &forward}, std::pair{"gru.backward.", &backward}}) {
    const std::string p = prefix;
    out.emplace_back(p + "w_reset", &gru->w_reset);
    out.emplace_back(p + "w_update", &gru->w_update);
    out.emplace_back(p + "w_candidate", &gru->w_candidate);
    out.emplace_back(p + "u_reset", &gru->u_reset);
    out.emplace_back(p + "u_update", &gru->u_update);
    out.emplace_back(p + "u_candidate", &gru->u_candidate);
  }
  for (std::size_t i = 0; i < capsnet::kInputCapsules; ++i) {
    for (std::size_t j = 0; j < capsnet::kOutputCapsules; ++j) {
      out.emplace_back("capsule.w" + std::to_string(i + 1) + std::to_string(j + 1), &capsules.transform(i, j));
    }
  }
  out.emplace_back("attention.a", &attention_a);
  out.emplace_back("attention.b", &attention_b);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::named() const {
  auto mutable_list = const_cast<ModelParams*>(this)->named();
  return {mutable_list.begin(), mutable_list.end()};
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  auto src = named();
  auto dst = out.named();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
  return out;
}

template <typename T>
ModelBinding<T> ModelBinding<T>::bind(Tape<T>& tape, const ModelParams<T>& params, const ModelConfig& cfg,
                                      bool trainable) {
  ModelBinding b;
  b.embedding = trainable ? tape.parameter(params.embedding, true) : tape.reference(params.embedding);
  b.forward = encoder::GruVars<T>::bind(tape, params.forward, trainable);
  b.backward = encoder::GruVars<T>::bind(tape, params.backward, trainable);
  for (std::size_t k = 0; k < b.transforms.size(); ++k) {
    const auto& w = params.capsules.transforms[k];
    b.transforms[k] = trainable ? tape.parameter(w) : tape.reference(w);
  }
  const bool attention_trainable = trainable && cfg.attention.trainable;
  b.attention_a = attention_trainable ? tape.parameter(params.attention_a) : tape.reference(params.attention_a);
  b.attention_b = attention_trainable ? tape.parameter(params.attention_b) : tape.reference(params.attention_b);
  return b;
}

template <typename T>
PairForward<T> forward_pair(const ModelBinding<T>& binding, const corpus::EncodedPair& pair, const ModelConfig& cfg,
                            bool with_loss) {
  auto& tape = *binding.embedding.tape;
  const auto masks = attention::pair_masks(pair.hypernym.tokens, pair.hyponym.tokens);

  const auto encode_side = [&](const corpus::TokenizedEntity& entity, const std::vector<std::uint8_t>& mask) {
    const auto embedded = encoder::embed(binding.embedding, std::span<const TokenId>(entity.ids));
    const auto context = encoder::bigru_encode(embedded, binding.forward, binding.backward);
    const auto alpha = attention::attention_weights(tape, mask, binding.attention_a, binding.attention_b,
                                                    cfg.attention.apply_softmax);
    return attention::entity_vector(context, alpha);
  };

  PairForward<T> out;
  out.hypernym_vector = encode_side(pair.hypernym, masks.first);
  out.hyponym_vector = encode_side(pair.hyponym, masks.second);
  const auto u_hat = capsnet::predict_vectors<T>(out.hypernym_vector, out.hyponym_vector,
                                                 std::span<const Var<T>, 4>(binding.transforms));
  out.outputs = capsnet::dynamic_routing(u_hat, cfg.routing_iterations);
  if (with_loss) out.loss = capsnet::margin_loss(out.outputs, pair.label, cfg.loss);
  return out;
}

template <typename T>
void accumulate_gradients(const Tape<T>& tape, const ModelBinding<T>& binding, ModelParams<T>& grads,
                          numerics::SparseRows<T>* embedding_rows) {
  const auto add_dense = [&](Var<T> v, Tensor<T>& dst) {
    if (!tape.has_grad(v.id)) return;
    const auto& g = tape.node(v.id).grad;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  };
  for (const auto& [row, values] : tape.row_grad(binding.embedding)) {
    if (embedding_rows) {
      auto [it, inserted] = embedding_rows->try_emplace(row, values);
      if (!inserted) {
        for (std::size_t c = 0; c < values.size(); ++c) it->second[c] += values[c];
      }
    } else {
      auto dst = grads.embedding.row(row);
      for (std::size_t c = 0; c < values.size(); ++c) dst[c] += values[c];
    }
  }
  for (auto [vars, g] : {std::pair{&binding.forward, &grads.forward}, std::pair{&binding.backward, &grads.backward}}) {
    add_dense(vars->w_reset, g->w_reset);
    add_dense(vars->w_update, g->w_update);
    add_dense(vars->w_candidate, g->w_candidate);
    add_dense(vars->u_reset, g->u_reset);
    add_dense(vars->u_update, g->u_update);
    add_dense(vars->u_candidate, g->u_candidate);
  }
  for (std::size_t k = 0; k < binding.transforms.size(); ++k) add_dense(binding.transforms[k], grads.capsules.transforms[k]);
  add_dense(binding.attention_a, grads.attention_a);
  add_dense(binding.attention_b, grads.attention_b);
}

template <typename T>
Prediction predict_pair(const ModelParams<T>& params, const ModelConfig& cfg, const corpus::EncodedPair& pair) {
  Tape<T> tape;
  const auto binding = ModelBinding<T>::bind(tape, params, cfg, false);
  const auto fwd = forward_pair(binding, pair, cfg, false);
  Prediction p;
  p.length_hypernymy = static_cast<double>(fwd.outputs.length(0));
  p.length_none = static_cast<double>(fwd.outputs.length(1));
  p.label = capsnet::classify(p.length_hypernymy, p.length_none);
  return p;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

#define HYPERCAPS_INSTANTIATE_MODEL(T)                                                                      \
  template struct ModelBinding<T>;                                                                          \
  template PairForward<T> forward_pair(const ModelBinding<T>&, const corpus::EncodedPair&, const ModelConfig&, \
                                       bool);                                                               \
  template void accumulate_gradients(const Tape<T>&, const ModelBinding<T>&, ModelParams<T>&,                \
                                     numerics::SparseRows<T>*);              \
  template Prediction predict_pair(const ModelParams<T>&, const ModelConfig&, const corpus::EncodedPair&);

HYPERCAPS_INSTANTIATE_MODEL(float)
HYPERCAPS_INSTANTIATE_MODEL(double)

}  // namespace hypercaps::model
