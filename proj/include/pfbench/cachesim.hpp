#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pfbench/trace.hpp"

namespace pfbench {

enum class Replacement { kLru };

struct CacheLevelConfig {
  std::uint64_t capacity = 0;  // bytes
  std::uint64_t associativity = 1;
  std::uint64_t line_size = 64;
  Replacement replacement = Replacement::kLru;

  std::uint64_t num_sets() const {
    return capacity / (associativity * line_size);
  }
};

struct HierarchyConfig {
  std::vector<CacheLevelConfig> levels;  // L1 first
  std::size_t miss_emit_level = 0;

  std::uint64_t line_size() const { return levels.front().line_size; }
};

struct LevelStats {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;

  friend bool operator==(const LevelStats&, const LevelStats&) = default;
};

struct SimStats {
  std::vector<LevelStats> levels;

  friend bool operator==(const SimStats&, const SimStats&) = default;
};

struct SimResult {
  std::vector<MissRecord> misses;
  SimStats stats;
};

// Throws ConfigError.
void validate(const HierarchyConfig& config);

// 32 KiB 8-way L1, 256 KiB 8-way L2, 1.25 MiB 20-way LLC, 64 B lines,
// misses emitted at the LLC.
HierarchyConfig default_broadwell_config();

// One set-associative LRU cache operating on line addresses.
class SetAssociativeCache {
 public:
  explicit SetAssociativeCache(const CacheLevelConfig& config);

  // Looks up `line_addr`, filling it on a miss. Returns true on hit.
  bool access(std::uint64_t line_addr);

  bool contains(std::uint64_t line_addr) const;

 private:
  struct Way {
    std::uint64_t tag = 0;
    std::uint64_t last_use = 0;
    bool valid = false;
  };

  std::uint64_t num_sets_;
  std::uint64_t ways_;
  std::vector<Way> storage_;  // num_sets_ * ways_
  std::uint64_t clock_ = 0;
};

// Non-inclusive hierarchy with fill-on-miss at every level on the miss path.
// Reads and writes are treated alike.
class CacheHierarchy {
 public:
  explicit CacheHierarchy(HierarchyConfig config);

  // Replays one access; returns the miss record if it missed at the emit
  // level.
  std::optional<MissRecord> access(const TraceRecord& record);

  const SimStats& stats() const { return stats_; }
  const HierarchyConfig& config() const { return config_; }

 private:
  HierarchyConfig config_;
  std::vector<SetAssociativeCache> caches_;
  SimStats stats_;
  int line_shift_;
  std::uint64_t next_timestep_ = 0;
};

SimResult simulate(std::span<const TraceRecord> trace,
                   const HierarchyConfig& config);

}  // namespace pfbench
