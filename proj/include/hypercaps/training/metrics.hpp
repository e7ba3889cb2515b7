#pragma once

#include <cstddef>
#include <span>

#include "hypercaps/corpus.hpp"

namespace hypercaps::training {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

// Scores over the positive (hypernymy) class.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion counts;

  static Metrics from_confusion(const Confusion& c);
  double accuracy() const;
  bool operator==(const Metrics&) const = default;
};

Confusion confusion(std::span<const Label> predicted, std::span<const Label> gold);
Metrics score(std::span<const Label> predicted, std::span<const Label> gold);

}  // namespace hypercaps::training
