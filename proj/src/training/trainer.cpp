#include "hypercaps/training/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "hypercaps/training/checkpoint.hpp"

namespace hypercaps::training {

namespace {

// Pairs per tape. Fixed so the gradient summation order never depends on
// the worker count.
constexpr std::size_t kChunkPairs = 8;

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

template <typename T>
model::ModelParams<T> zeros_without_embedding(const model::ModelParams<T>& params) {
  model::ModelParams<T> g;
  auto src = params.named();
  auto dst = g.named();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].first == "embedding") continue;
    *dst[i].second = Tensor<T>(src[i].second->shape());
  }
  return g;
}

template <typename T>
void compute_batch_gradient(const model::ModelParams<T>& params, const model::ModelConfig& cfg,
                            std::span<const corpus::EncodedPair* const> pairs, std::size_t workers,
                            BatchGradient<T>& out) {
  const std::size_t chunks = (pairs.size() + kChunkPairs - 1) / kChunkPairs;
  std::vector<model::ModelParams<T>> dense(chunks);
  std::vector<numerics::SparseRows<T>> rows(chunks);
  std::vector<double> losses(chunks, 0.0);

  parallel_for(chunks, workers, [&](std::size_t c) {
    numerics::Tape<T> tape;
    const auto binding = model::ModelBinding<T>::bind(tape, params, cfg, true);
    const std::size_t begin = c * kChunkPairs;
    const std::size_t end = std::min(pairs.size(), begin + kChunkPairs);
    numerics::Var<T> total{};
    double loss = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto fwd = model::forward_pair(binding, *pairs[i], cfg, true);
      loss += static_cast<double>(fwd.loss.value()[0]);
      total = i == begin ? fwd.loss : numerics::add(total, fwd.loss);
    }
    tape.backward(total);
    dense[c] = zeros_without_embedding(params);
    model::accumulate_gradients(tape, binding, dense[c], &rows[c]);
    losses[c] = loss;
  });

  if (out.grads.embedding.shape() != params.embedding.shape()) {
    out.grads = model::ModelParams<T>::zeros_like(params);
  } else {
    for (auto& [name, t] : out.grads.named()) t->fill(T{0});
  }
  out.loss = 0.0;
  auto total = out.grads.named();
  for (std::size_t c = 0; c < chunks; ++c) {
    out.loss += losses[c];
    auto part = dense[c].named();
    for (std::size_t k = 0; k < total.size(); ++k) {
      if (total[k].first == "embedding") continue;
      auto& dst = *total[k].second;
      const auto& src = *part[k].second;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    for (const auto& [row, values] : rows[c]) {
      auto dst = out.grads.embedding.row(row);
      for (std::size_t i = 0; i < values.size(); ++i) dst[i] += values[i];
    }
  }
  const T scale = pairs.empty() ? T{0} : T{1} / static_cast<T>(pairs.size());
  for (auto& [name, t] : total) {
    for (auto& v : t->values()) v *= scale;
  }
  // PAD stays inert.
  for (auto& v : out.grads.embedding.row(corpus::kPadId)) v = T{0};
  out.loss = pairs.empty() ? 0.0 : out.loss / static_cast<double>(pairs.size());
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch);
}

template <typename T>
Checkpoint snapshot(const corpus::Vocabulary& vocab, const TrainConfig& cfg, const model::ModelParams<T>& params) {
  Checkpoint c;
  c.vocabulary = vocab;
  c.config = cfg;
  c.params = params.template cast<float>();
  return c;
}

template <typename T>
TrainResult run_training(const TrainConfig& config, const corpus::Vocabulary& vocab,
                         std::span<const corpus::EncodedPair> train_set,
                         std::span<const corpus::EncodedPair> selection_set, const EpochCallback& on_epoch) {
  const auto& mcfg = config.model;
  auto params = model::ModelParams<T>::initialize(mcfg, config.seed);

  std::vector<Tensor<T>*> trainable;
  for (auto& [name, t] : params.named()) {
    if (name.rfind("attention.", 0) == 0 && !mcfg.attention.trainable) continue;
    trainable.push_back(t);
  }
  auto state = AdaDeltaState<T>::for_params(trainable);

  TrainResult result;
  result.best = snapshot(vocab, config, params);
  double best_f1 = -1.0;
  std::size_t stale_epochs = 0;
  BatchGradient<T> batch_grad;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = corpus::make_batches(train_set, config.batch_size, epoch_seed(config.seed, epoch));
    double loss_total = 0.0;
    bool diverged = false;
    for (const auto& batch : batches) {
      std::vector<const corpus::EncodedPair*> members;
      members.reserve(batch.size());
      for (auto i : batch.indices) members.push_back(&train_set[i]);
      compute_batch_gradient<T>(params, mcfg, members, config.workers, batch_grad);
      if (!std::isfinite(batch_grad.loss)) {
        result.diagnostic = "loss became non-finite in epoch " + std::to_string(epoch);
        diverged = true;
        break;
      }
      std::vector<const Tensor<T>*> grads;
      auto named_grads = batch_grad.grads.named();
      for (auto& [name, t] : named_grads) {
        if (name.rfind("attention.", 0) == 0 && !mcfg.attention.trainable) continue;
        grads.push_back(t);
      }
      try {
        adadelta_step<T>(trainable, grads, state, config.optimizer);
      } catch (const NonFiniteGradient& e) {
        result.diagnostic = std::string(e.what()) + " in epoch " + std::to_string(epoch);
        diverged = true;
        break;
      }
      loss_total += batch_grad.loss * static_cast<double>(batch.size());
    }
    if (diverged) {
      result.status = TrainStatus::diverged;
      return result;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_total / static_cast<double>(train_set.size());
    log.validation = evaluate_params(params, mcfg, selection_set, config.workers);
    if (config.evaluate_training) log.training = evaluate_params(params, mcfg, train_set, config.workers);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    if (log.validation.f1 > best_f1) {
      best_f1 = log.validation.f1;
      result.best = snapshot(vocab, config, params);
      result.best.best_validation = log.validation;
      result.best.best_epoch = epoch;
      stale_epochs = 0;
    } else if (++stale_epochs >= config.patience) {
      result.status = TrainStatus::early_stopped;
      break;
    }
  }
  return result;
}

}  // namespace

std::size_t default_workers() {
  if (const char* env = std::getenv("HYPERCAPS_WORKERS")) {
    try {
      const auto n = std::stoul(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string_view to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

Precision parse_precision(std::string_view text) {
  if (text == "float32" || text == "32") return Precision::float32;
  if (text == "float64" || text == "64") return Precision::float64;
  throw std::invalid_argument("unknown precision '" + std::string(text) + "' (expected float32 or float64)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (patience == 0) throw std::invalid_argument("patience must be at least 1");
  if (max_epochs == 0) throw std::invalid_argument("max epochs must be at least 1");
  if (!(optimizer.rho > 0.0 && optimizer.rho < 1.0)) throw std::invalid_argument("AdaDelta rho must lie in (0, 1)");
  if (!(optimizer.epsilon > 0.0)) throw std::invalid_argument("AdaDelta epsilon must be positive");
  if (model.embed_dim == 0 || model.hidden_dim == 0 || model.capsule_dim == 0) {
    throw std::invalid_argument("embedding, hidden and capsule dimensions must be positive");
  }
  if (model.routing_iterations < 1) throw std::invalid_argument("routing iterations must be at least 1");
  model.loss.validate();
}

std::string epoch_log_header() { return "epoch\ttrain_loss\tval_P\tval_R\tval_F1\tseconds"; }

std::string format_epoch_log(const EpochLog& log) {
  std::ostringstream os;
  os << log.epoch << '\t' << std::setprecision(9) << log.train_loss << '\t' << std::setprecision(6)
     << log.validation.precision << '\t' << log.validation.recall << '\t' << log.validation.f1 << '\t'
     << std::fixed << std::setprecision(3) << log.seconds;
  return os.str();
}

template <typename T>
BatchGradient<T> batch_gradient(const model::ModelParams<T>& params, const model::ModelConfig& cfg,
                                std::span<const corpus::EncodedPair* const> pairs, std::size_t workers) {
  BatchGradient<T> out;
  compute_batch_gradient(params, cfg, pairs, workers, out);
  return out;
}

template <typename T>
std::vector<model::Prediction> predict_params(const model::ModelParams<T>& params, const model::ModelConfig& cfg,
                                              std::span<const corpus::EncodedPair> pairs, std::size_t workers) {
  std::vector<model::Prediction> out(pairs.size());
  const std::size_t chunks = (pairs.size() + kChunkPairs - 1) / kChunkPairs;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t end = std::min(pairs.size(), (c + 1) * kChunkPairs);
    for (std::size_t i = c * kChunkPairs; i < end; ++i) out[i] = model::predict_pair(params, cfg, pairs[i]);
  });
  return out;
}

template <typename T>
Metrics evaluate_params(const model::ModelParams<T>& params, const model::ModelConfig& cfg,
                        std::span<const corpus::EncodedPair> pairs, std::size_t workers) {
  const auto predictions = predict_params(params, cfg, pairs, workers);
  std::vector<Label> predicted, gold;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    predicted.push_back(predictions[i].label);
    gold.push_back(pairs[i].label);
  }
  return score(predicted, gold);
}

TrainResult train(const TrainConfig& config, std::span<const corpus::EntityPair> train_pairs,
                  std::span<const corpus::EntityPair> validation_pairs, const EpochCallback& on_epoch) {
  config.validate();
  if (train_pairs.empty()) throw corpus::CorpusError("training corpus is empty");
  const auto vocab = corpus::Vocabulary::build(train_pairs, config.mode);
  TrainConfig resolved = config;
  resolved.model.vocab_size = vocab.size();

  const auto train_set = corpus::encode_pairs(train_pairs, vocab);
  const auto validation_set = corpus::encode_pairs(validation_pairs, vocab);
  const std::span<const corpus::EncodedPair> selection =
      validation_set.empty() ? std::span<const corpus::EncodedPair>(train_set) : std::span<const corpus::EncodedPair>(validation_set);

  if (resolved.precision == Precision::float64) {
    return run_training<double>(resolved, vocab, train_set, selection, on_epoch);
  }
  return run_training<float>(resolved, vocab, train_set, selection, on_epoch);
}

#define HYPERCAPS_INSTANTIATE_TRAINER(T)                                                                   \
  template BatchGradient<T> batch_gradient(const model::ModelParams<T>&, const model::ModelConfig&,        \
                                           std::span<const corpus::EncodedPair* const>, std::size_t);      \
  template std::vector<model::Prediction> predict_params(const model::ModelParams<T>&,                     \
                                                         const model::ModelConfig&,                        \
                                                         std::span<const corpus::EncodedPair>, std::size_t); \
  template Metrics evaluate_params(const model::ModelParams<T>&, const model::ModelConfig&,                \
                                   std::span<const corpus::EncodedPair>, std::size_t);

HYPERCAPS_INSTANTIATE_TRAINER(float)
HYPERCAPS_INSTANTIATE_TRAINER(double)

}  // namespace hypercaps::training
