#pragma once

// Classical prefetchers. Both are online state machines that see one miss at
// a time and return up to 10 predicted deltas relative to that miss's line.

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "pfbench/prediction.hpp"
#include "pfbench/trace.hpp"
#include "pfbench/vocab.hpp"

namespace pfbench {

struct StreamConfig {
  std::size_t max_streams = 10;
  std::int64_t window = 16;       // match radius, lines
  std::uint32_t confirm = 2;      // consistent deltas needed before predicting
  std::size_t distance = 10;      // predictions {s, 2s, ..., distance*s}
};

struct StreamEntry {
  std::uint64_t last_line = 0;
  Delta stride = 0;
  std::uint32_t confidence = 0;  // consecutive observations of `stride`
  std::uint64_t last_use = 0;
};

// A miss joins the stream whose last line is nearest within +-window (ties
// to the older slot). A delta equal to the stream's stride raises its
// confidence, any other nonzero delta restarts it at 1 with the new stride,
// and a zero delta leaves it unchanged. A miss matching no stream allocates
// one (evicting the least recently used) and predicts nothing.
class StreamPrefetcher {
 public:
  explicit StreamPrefetcher(StreamConfig cfg = {});

  std::vector<Delta> predict_update(const MissRecord& miss);
  const std::vector<StreamEntry>& streams() const { return streams_; }
  const StreamConfig& config() const { return cfg_; }

 private:
  StreamConfig cfg_;
  std::vector<StreamEntry> streams_;
  std::uint64_t clock_ = 0;
};

struct GhbConfig {
  std::size_t index_entries = 256;
  std::size_t buffer_entries = 256;
  std::size_t depth = 10;
};

// PC/DC global history buffer. Entries are addressed by a monotonically
// increasing sequence number; entry s is live iff s >= next - capacity, so a
// link into overwritten history reads as null. Each entry links to the
// previous entry of the same PC, always at a smaller sequence number.
class GhbPrefetcher {
 public:
  static constexpr std::uint64_t kNull = UINT64_MAX;

  struct Entry {
    std::uint64_t line = 0;
    std::uint64_t prev = kNull;
  };

  explicit GhbPrefetcher(GhbConfig cfg = {});

  // Inserts the miss, then correlates on this PC's last two deltas: the
  // most recent earlier occurrence of that pair is followed by up to
  // `depth` recorded deltas, returned as cumulative offsets from the
  // current line (duplicates dropped).
  std::vector<Delta> predict_update(const MissRecord& miss);

  // Line addresses of the PC's live history, newest first.
  std::vector<std::uint64_t> history(std::uint64_t pc) const;
  std::size_t index_size() const { return index_.size(); }
  const GhbConfig& config() const { return cfg_; }

 private:
  struct IndexEntry {
    std::uint64_t head = kNull;
    std::uint64_t last_use = 0;
  };

  bool live(std::uint64_t seq) const;

  GhbConfig cfg_;
  std::vector<Entry> buffer_;
  std::uint64_t next_ = 0;
  std::unordered_map<std::uint64_t, IndexEntry> index_;
  std::uint64_t clock_ = 0;
};

// Replays a prefetcher over a miss stream: one PredictionSet per miss except
// the last, labelled with the next delta. Probabilities are reported as 1.
template <typename Prefetcher>
std::vector<PredictionSet> run_baseline(Prefetcher& p,
                                        std::span<const MissRecord> misses) {
  std::vector<PredictionSet> out;
  if (misses.size() < 2) return out;
  out.reserve(misses.size() - 1);
  for (std::size_t n = 0; n + 1 < misses.size(); ++n) {
    PredictionSet ps;
    ps.timestep = misses[n].timestep;
    for (Delta d : p.predict_update(misses[n])) ps.predictions.emplace_back(d, 1.0);
    ps.label = static_cast<Delta>(misses[n + 1].line_addr - misses[n].line_addr);
    out.push_back(std::move(ps));
  }
  return out;
}

}  // namespace pfbench
