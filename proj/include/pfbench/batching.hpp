#pragma once

#include <cstdint>
#include <vector>

#include "pfbench/error.hpp"

namespace pfbench {

// Event indices for one truncated-BPTT window: index[t][lane], and whether
// the lane starts from a zeroed state at step t.
struct WindowBatch {
  std::vector<std::vector<std::size_t>> index;
  std::vector<std::vector<std::uint8_t>> reset;

  std::size_t steps() const { return index.size(); }
  std::size_t lanes() const { return index.empty() ? 0 : index[0].size(); }
};

// Splits an event stream into `lanes` contiguous, non-overlapping slices
// and walks each slice in windows of `window` events. Recurrent state is
// carried across windows; it is reset at each lane's start (also after it
// wraps) and at every event flagged as a segment start.
class LaneBatcher {
 public:
  LaneBatcher(std::vector<std::uint8_t> segment_start, std::size_t lanes,
              std::size_t window)
      : segment_start_(std::move(segment_start)), window_(window) {
    const std::size_t n = segment_start_.size();
    if (n == 0) throw DataError("no training events");
    if (lanes == 0 || window == 0) {
      throw ConfigError("batch size and sequence length must be positive");
    }
    lanes = std::min(lanes, n);
    for (std::size_t b = 0; b < lanes; ++b) {
      begin_.push_back(b * n / lanes);
      end_.push_back((b + 1) * n / lanes);
    }
    cursor_ = begin_;
    fresh_.assign(lanes, 1);
  }

  std::size_t lanes() const { return begin_.size(); }

  WindowBatch next() {
    WindowBatch batch;
    batch.index.assign(window_, std::vector<std::size_t>(lanes()));
    batch.reset.assign(window_, std::vector<std::uint8_t>(lanes()));
    for (std::size_t t = 0; t < window_; ++t) {
      for (std::size_t b = 0; b < lanes(); ++b) {
        const std::size_t i = cursor_[b];
        batch.index[t][b] = i;
        batch.reset[t][b] = fresh_[b] || segment_start_[i];
        fresh_[b] = 0;
        if (++cursor_[b] == end_[b]) {
          cursor_[b] = begin_[b];
          fresh_[b] = 1;
        }
      }
    }
    return batch;
  }

 private:
  std::vector<std::uint8_t> segment_start_;
  std::size_t window_;
  std::vector<std::size_t> begin_, end_, cursor_;
  std::vector<std::uint8_t> fresh_;
};

}  // namespace pfbench
