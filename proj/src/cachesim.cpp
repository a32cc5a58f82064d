#include "pfbench/cachesim.hpp"

#include <fmt/format.h>

#include "pfbench/error.hpp"

namespace pfbench {

void validate(const HierarchyConfig& config) {
  if (config.levels.empty()) {
    throw ConfigError("cache hierarchy needs at least one level");
  }
  if (config.miss_emit_level >= config.levels.size()) {
    throw ConfigError(fmt::format("miss_emit_level {} out of range (levels={})",
                                  config.miss_emit_level,
                                  config.levels.size()));
  }
  const auto line = config.levels.front().line_size;
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    const auto& level = config.levels[i];
    if (level.line_size != line) {
      throw ConfigError("line_size must be identical across cache levels");
    }
    log2_exact(level.line_size);
    if (level.associativity == 0 || level.capacity == 0 ||
        level.capacity % (level.associativity * level.line_size) != 0) {
      throw ConfigError(fmt::format(
          "level {}: capacity {} not divisible by associativity x line_size",
          i + 1, level.capacity));
    }
  }
}

HierarchyConfig default_broadwell_config() {
  HierarchyConfig config;
  config.levels = {
      {32 * 1024, 8, 64, Replacement::kLru},
      {256 * 1024, 8, 64, Replacement::kLru},
      {1280 * 1024, 20, 64, Replacement::kLru},
  };
  config.miss_emit_level = 2;
  return config;
}

SetAssociativeCache::SetAssociativeCache(const CacheLevelConfig& config)
    : num_sets_(config.num_sets()),
      ways_(config.associativity),
      storage_(num_sets_ * ways_) {}

bool SetAssociativeCache::access(std::uint64_t line_addr) {
  ++clock_;
  const std::uint64_t set = line_addr % num_sets_;
  const std::uint64_t tag = line_addr / num_sets_;
  Way* ways = &storage_[set * ways_];
  Way* victim = &ways[0];
  for (std::uint64_t w = 0; w < ways_; ++w) {
    Way& way = ways[w];
    if (way.valid && way.tag == tag) {
      way.last_use = clock_;
      return true;
    }
    // Prefer an invalid way, else the least recently used one.
    if (victim->valid && (!way.valid || way.last_use < victim->last_use)) {
      victim = &way;
    }
  }
  *victim = {tag, clock_, true};
  return false;
}

bool SetAssociativeCache::contains(std::uint64_t line_addr) const {
  const std::uint64_t set = line_addr % num_sets_;
  const std::uint64_t tag = line_addr / num_sets_;
  const Way* ways = &storage_[set * ways_];
  for (std::uint64_t w = 0; w < ways_; ++w) {
    if (ways[w].valid && ways[w].tag == tag) return true;
  }
  return false;
}

CacheHierarchy::CacheHierarchy(HierarchyConfig config)
    : config_(std::move(config)) {
  validate(config_);
  for (const auto& level : config_.levels) caches_.emplace_back(level);
  stats_.levels.resize(config_.levels.size());
  line_shift_ = log2_exact(config_.line_size());
}

std::optional<MissRecord> CacheHierarchy::access(const TraceRecord& record) {
  const std::uint64_t line = record.addr >> line_shift_;
  std::size_t level = 0;
  for (; level < caches_.size(); ++level) {
    auto& s = stats_.levels[level];
    ++s.accesses;
    if (caches_[level].access(line)) {
      ++s.hits;
      break;
    }
    ++s.misses;
  }
  // `level` is the first level that hit (or size() if all missed).
  if (level > config_.miss_emit_level) {
    return MissRecord{next_timestep_++, record.pc, record.addr, line};
  }
  return std::nullopt;
}

SimResult simulate(std::span<const TraceRecord> trace,
                   const HierarchyConfig& config) {
  CacheHierarchy hierarchy(config);
  SimResult result;
  for (const auto& record : trace) {
    if (auto miss = hierarchy.access(record)) result.misses.push_back(*miss);
  }
  result.stats = hierarchy.stats();
  return result;
}

}  // namespace pfbench
