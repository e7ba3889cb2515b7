#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypercaps/corpus.hpp"
#include "hypercaps/model.hpp"
#include "hypercaps/training/adadelta.hpp"
#include "hypercaps/training/metrics.hpp"

namespace hypercaps::training {

enum class Precision { float32, float64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

struct TrainConfig {
  corpus::TokenMode mode = corpus::TokenMode::word;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  Precision precision = Precision::float32;
  AdaDeltaConfig optimizer;
  // vocab_size is filled in from the training vocabulary.
  model::ModelConfig model;
  // Also score the training split after every epoch.
  bool evaluate_training = false;
  // 0 picks the hardware concurrency. Results do not depend on it.
  std::size_t workers = 0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  Metrics validation;
  std::optional<Metrics> training;
  double seconds = 0.0;
};

// Per-epoch TSV: epoch, train_loss, val_P, val_R, val_F1, seconds.
std::string epoch_log_header();
std::string format_epoch_log(const EpochLog& log);

struct Checkpoint;

enum class TrainStatus { completed, early_stopped, diverged };

struct TrainResult;

using EpochCallback = std::function<void(const EpochLog&)>;

// Builds the vocabulary from `train_pairs`, then runs shuffled mini-batch
// AdaDelta on the mean batch margin loss, keeping the parameters with the
// best validation F1. An empty validation split selects on the training
// split instead.
TrainResult train(const TrainConfig& config, std::span<const corpus::EntityPair> train_pairs,
                  std::span<const corpus::EntityPair> validation_pairs, const EpochCallback& on_epoch = {});

// Scores encoded pairs with the given parameters.
template <typename T>
Metrics evaluate_params(const model::ModelParams<T>& params, const model::ModelConfig& cfg,
                        std::span<const corpus::EncodedPair> pairs, std::size_t workers = 0);

template <typename T>
std::vector<model::Prediction> predict_params(const model::ModelParams<T>& params, const model::ModelConfig& cfg,
                                              std::span<const corpus::EncodedPair> pairs, std::size_t workers = 0);

// Mean margin loss and its gradient over `pairs`, computed in fixed-size
// chunks summed in order so the result does not depend on `workers`.
template <typename T>
struct BatchGradient {
  double loss = 0.0;
  model::ModelParams<T> grads;
};

template <typename T>
BatchGradient<T> batch_gradient(const model::ModelParams<T>& params, const model::ModelConfig& cfg,
                                std::span<const corpus::EncodedPair* const> pairs, std::size_t workers = 0);

std::size_t default_workers();

}  // namespace hypercaps::training
