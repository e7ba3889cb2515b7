#include "hypercaps/baselines.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace hypercaps::baselines {

std::string_view to_string(Method m) { return m == Method::string_containing ? "string_containing" : "set_containing"; }

Method parse_method(std::string_view text) {
  if (text == "string_containing" || text == "string") return Method::string_containing;
  if (text == "set_containing" || text == "set") return Method::set_containing;
  throw std::invalid_argument("unknown baseline '" + std::string(text) + "' (expected string_containing or set_containing)");
}

bool string_containing(std::string_view x1, std::string_view x2, corpus::TokenMode mode) {
  const auto a = corpus::tokenize_content(x1, mode);
  const auto b = corpus::tokenize_content(x2, mode);
  if (a.size() >= b.size()) return false;
  return std::search(b.begin(), b.end(), a.begin(), a.end()) != b.end();
}

bool set_containing(std::string_view x1, std::string_view x2, corpus::TokenMode mode) {
  const auto a = corpus::tokenize_content(x1, mode);
  const auto b = corpus::tokenize_content(x2, mode);
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  return sa.size() < sb.size() && std::includes(sb.begin(), sb.end(), sa.begin(), sa.end());
}

BaselinePrediction predict(Method method, std::span<const corpus::EntityPair> pairs, corpus::TokenMode mode) {
  BaselinePrediction out;
  out.method = method;
  out.predictions.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.predictions.push_back(method == Method::string_containing ? string_containing(p.hypernym, p.hyponym, mode)
                                                                  : set_containing(p.hypernym, p.hyponym, mode));
  }
  return out;
}

training::Metrics run_baseline(Method method, std::span<const corpus::EntityPair> pairs, corpus::TokenMode mode) {
  const auto pred = predict(method, pairs, mode);
  std::vector<Label> predicted, gold;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    predicted.push_back(pred.predictions[i] ? Label::positive : Label::negative);
    gold.push_back(pairs[i].label);
  }
  return training::score(predicted, gold);
}

}  // namespace hypercaps::baselines
