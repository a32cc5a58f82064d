#include "pfbench/baselines.hpp"

#include <algorithm>

#include "pfbench/error.hpp"

namespace pfbench {

StreamPrefetcher::StreamPrefetcher(StreamConfig cfg) : cfg_(cfg) {
  if (cfg_.max_streams == 0 || cfg_.confirm == 0 || cfg_.window < 0) {
    throw ConfigError("stream prefetcher needs >= 1 stream and confirm >= 1");
  }
}

std::vector<Delta> StreamPrefetcher::predict_update(const MissRecord& miss) {
  ++clock_;
  const std::uint64_t line = miss.line_addr;
  std::size_t best = streams_.size();
  std::uint64_t best_dist = 0;
  for (std::size_t i = 0; i < streams_.size(); ++i) {
    const std::uint64_t a = streams_[i].last_line;
    const std::uint64_t dist = a > line ? a - line : line - a;
    if (dist > static_cast<std::uint64_t>(cfg_.window)) continue;
    if (best == streams_.size() || dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  if (best == streams_.size()) {
    StreamEntry e{line, 0, 0, clock_};
    if (streams_.size() < cfg_.max_streams) {
      streams_.push_back(e);
    } else {
      auto lru = std::min_element(
          streams_.begin(), streams_.end(),
          [](const auto& a, const auto& b) { return a.last_use < b.last_use; });
      *lru = e;
    }
    return {};
  }
  StreamEntry& s = streams_[best];
  s.last_use = clock_;
  const auto d = static_cast<Delta>(line - s.last_line);
  if (d != 0) {
    if (s.confidence > 0 && d == s.stride) {
      ++s.confidence;
    } else {
      s.stride = d;
      s.confidence = 1;
    }
    s.last_line = line;
  }
  std::vector<Delta> out;
  if (s.confidence >= cfg_.confirm) {
    for (std::size_t k = 1; k <= cfg_.distance; ++k) {
      out.push_back(static_cast<Delta>(k) * s.stride);
    }
  }
  return out;
}

GhbPrefetcher::GhbPrefetcher(GhbConfig cfg) : cfg_(cfg) {
  if (cfg_.index_entries == 0 || cfg_.buffer_entries == 0) {
    throw ConfigError("GHB tables need at least one entry");
  }
  buffer_.resize(cfg_.buffer_entries);
}

bool GhbPrefetcher::live(std::uint64_t seq) const {
  return seq != kNull && seq < next_ &&
         seq + cfg_.buffer_entries >= next_;
}

std::vector<std::uint64_t> GhbPrefetcher::history(std::uint64_t pc) const {
  std::vector<std::uint64_t> lines;
  const auto it = index_.find(pc);
  if (it == index_.end()) return lines;
  for (std::uint64_t s = it->second.head; live(s);
       s = buffer_[s % cfg_.buffer_entries].prev) {
    lines.push_back(buffer_[s % cfg_.buffer_entries].line);
  }
  return lines;
}

std::vector<Delta> GhbPrefetcher::predict_update(const MissRecord& miss) {
  ++clock_;
  auto it = index_.find(miss.pc);
  if (it == index_.end()) {
    if (index_.size() >= cfg_.index_entries) {
      auto lru = std::min_element(index_.begin(), index_.end(),
                                  [](const auto& a, const auto& b) {
                                    return a.second.last_use <
                                           b.second.last_use;
                                  });
      index_.erase(lru);
    }
    it = index_.emplace(miss.pc, IndexEntry{}).first;
  }
  const std::uint64_t seq = next_++;
  buffer_[seq % cfg_.buffer_entries] = {miss.line_addr,
                                        live(it->second.head) ? it->second.head
                                                              : kNull};
  it->second.head = seq;
  it->second.last_use = clock_;

  const auto lines = history(miss.pc);
  if (lines.size() < 3) return {};
  // Chronological deltas, oldest first.
  std::vector<Delta> d;
  for (std::size_t j = lines.size() - 1; j-- > 0;) {
    d.push_back(static_cast<Delta>(lines[j] - lines[j + 1]));
  }
  const std::size_t m = d.size();
  const Delta k0 = d[m - 2];
  const Delta k1 = d[m - 1];
  std::vector<Delta> out;
  for (std::size_t i = m - 1; i-- > 1;) {
    if (d[i - 1] != k0 || d[i] != k1) continue;
    Delta sum = 0;
    for (std::size_t j = i + 1; j < m && out.size() < cfg_.depth; ++j) {
      sum += d[j];
      if (std::find(out.begin(), out.end(), sum) == out.end()) {
        out.push_back(sum);
      }
    }
    break;
  }
  return out;
}

}  // namespace pfbench
