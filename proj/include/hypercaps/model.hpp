#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hypercaps/attention.hpp"
#include "hypercaps/capsnet.hpp"
#include "hypercaps/corpus.hpp"
#include "hypercaps/encoder.hpp"

namespace hypercaps::model {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 256;
  // Per direction; entity vectors are 2 * hidden_dim wide.
  std::size_t hidden_dim = 64;
  std::size_t capsule_dim = 64;
  int routing_iterations = 2;
  attention::AttentionConfig attention;
  capsnet::LossConfig loss;

  std::size_t entity_dim() const { return 2 * hidden_dim; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Every trainable tensor of the network.
template <typename T>
struct ModelParams {
  Tensor<T> embedding;  // [vocab × embed_dim], PAD row kept at zero
  encoder::GruParams<T> forward;
  encoder::GruParams<T> backward;
  capsnet::CapsuleParams<T> capsules;
  Tensor<T> attention_a;  // {1}
  Tensor<T> attention_b;  // {1}

  // Embeddings uniform in ±0.05, matrices Glorot-uniform.
  static ModelParams initialize(const ModelConfig& cfg, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);

  // Stable name → tensor listing used for checkpoints and optimisers.
  std::vector<std::pair<std::string, Tensor<T>*>> named();
  std::vector<std::pair<std::string, const Tensor<T>*>> named() const;

  template <typename U>
  ModelParams<U> cast() const;
};

// Model parameters as tape leaves.
template <typename T>
struct ModelBinding {
  Var<T> embedding;
  encoder::GruVars<T> forward;
  encoder::GruVars<T> backward;
  std::array<Var<T>, 4> transforms;
  Var<T> attention_a;
  Var<T> attention_b;

  // With `trainable` false every leaf is a constant and no backward
  // closures are recorded.
  static ModelBinding bind(Tape<T>& tape, const ModelParams<T>& params, const ModelConfig& cfg, bool trainable);
};

template <typename T>
struct PairForward {
  capsnet::CapsuleOutputs<T> outputs;
  Var<T> hypernym_vector;
  Var<T> hyponym_vector;
  Var<T> loss;  // unset unless requested
};

// Encoder → difference attention → capsule routing (→ margin loss).
template <typename T>
PairForward<T> forward_pair(const ModelBinding<T>& binding, const corpus::EncodedPair& pair, const ModelConfig& cfg,
                            bool with_loss);

// Adds the tape's gradients for `binding` into `grads`. When
// `embedding_rows` is given, embedding gradients are merged there by row and
// grads.embedding is left untouched.
template <typename T>
void accumulate_gradients(const Tape<T>& tape, const ModelBinding<T>& binding, ModelParams<T>& grads,
                          numerics::SparseRows<T>* embedding_rows = nullptr);

struct Prediction {
  Label label = Label::negative;
  double length_hypernymy = 0.0;
  double length_none = 0.0;
};

template <typename T>
Prediction predict_pair(const ModelParams<T>& params, const ModelConfig& cfg, const corpus::EncodedPair& pair);

}  // namespace hypercaps::model
