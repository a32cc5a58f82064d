#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pfbench/vocab.hpp"

namespace pfbench {

// Predicted next deltas for one miss event, best first, plus the true next
// delta. `label_in_vocab` is false when the label cannot be predicted by the
// model that produced the set (outside its output vocabulary).
struct PredictionSet {
  std::uint64_t timestep = 0;
  std::vector<std::pair<Delta, double>> predictions;
  Delta label = 0;
  bool label_in_vocab = true;

  bool contains(Delta d) const {
    for (const auto& p : predictions) {
      if (p.first == d) return true;
    }
    return false;
  }
};

}  // namespace pfbench
