#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypercaps/corpus.hpp"
#include "hypercaps/training/metrics.hpp"

// Deterministic containment rules: the (shorter, more general) hypernym
// candidate must appear inside the hyponym candidate.
namespace hypercaps::baselines {

enum class Method { string_containing, set_containing };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

// x1's token sequence occurs contiguously inside x2's and the two differ.
bool string_containing(std::string_view x1, std::string_view x2, corpus::TokenMode mode = corpus::TokenMode::word);

// token-set(x1) is a strict subset of token-set(x2).
bool set_containing(std::string_view x1, std::string_view x2, corpus::TokenMode mode = corpus::TokenMode::word);

struct BaselinePrediction {
  Method method = Method::string_containing;
  std::vector<bool> predictions;
};

BaselinePrediction predict(Method method, std::span<const corpus::EntityPair> pairs, corpus::TokenMode mode);

training::Metrics run_baseline(Method method, std::span<const corpus::EntityPair> pairs, corpus::TokenMode mode);

}  // namespace hypercaps::baselines
