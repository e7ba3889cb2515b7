#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypercaps/corpus.hpp"
#include "hypercaps/model.hpp"
#include "hypercaps/training/metrics.hpp"
#include "hypercaps/training/trainer.hpp"

namespace hypercaps::training {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Single-file container:
//   HYPERCAPS-CHECKPOINT <version>\n
//   <header byte count>\n
//   <JSON header: config, vocabulary, metrics, tensor index>\n
//   <tensors as little-endian float32, in index order>
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  corpus::Vocabulary vocabulary;
  TrainConfig config;
  model::ModelParams<float> params;
  std::optional<Metrics> best_validation;
  std::size_t best_epoch = 0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  TrainStatus status = TrainStatus::completed;
  std::string diagnostic;
};

// Training configuration as JSON text (sorted keys) and back.
std::string config_to_json_text(const TrainConfig& config);
TrainConfig config_from_json_text(std::string_view text);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Scoring through the checkpoint's vocabulary and precision.
Metrics evaluate(const Checkpoint& ckpt, std::span<const corpus::EntityPair> pairs, std::size_t workers = 0);
std::vector<model::Prediction> predict(const Checkpoint& ckpt, std::span<const corpus::EntityPair> pairs,
                                       std::size_t workers = 0);

}  // namespace hypercaps::training
