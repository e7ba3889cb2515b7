#include "hypercaps/training/metrics.hpp"

#include <stdexcept>
#include <string>

namespace hypercaps::training {

Metrics Metrics::from_confusion(const Confusion& c) {
  Metrics m;
  m.counts = c;
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

double Metrics::accuracy() const {
  const auto total = counts.total();
  return total ? static_cast<double>(counts.tp + counts.tn) / static_cast<double>(total) : 0.0;
}

Confusion confusion(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(predicted.size()) + " predictions for " +
                                std::to_string(gold.size()) + " gold labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == Label::positive;
    const bool g = gold[i] == Label::positive;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics score(std::span<const Label> predicted, std::span<const Label> gold) {
  return Metrics::from_confusion(confusion(predicted, gold));
}

}  // namespace hypercaps::training
