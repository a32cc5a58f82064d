#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pfbench/cachesim.hpp"
#include "pfbench/error.hpp"
#include "pfbench/random.hpp"

namespace pfbench {
namespace {

HierarchyConfig single_level(std::uint64_t sets, std::uint64_t ways,
                             std::uint64_t line = 64) {
  HierarchyConfig h;
  h.levels.push_back({sets * ways * line, ways, line, Replacement::kLru});
  h.miss_emit_level = 0;
  return h;
}

std::vector<TraceRecord> lines_to_trace(const std::vector<std::uint64_t>& lines) {
  std::vector<TraceRecord> t;
  for (std::size_t i = 0; i < lines.size(); ++i) t.push_back({0x400000 + i % 7, lines[i] * 64 + i % 64});
  return t;
}

void expect_conservation(const SimStats& s) {
  for (std::size_t l = 0; l < s.levels.size(); ++l) {
    EXPECT_EQ(s.levels[l].accesses, s.levels[l].hits + s.levels[l].misses);
    if (l > 0) {
      EXPECT_EQ(s.levels[l].accesses, s.levels[l - 1].misses);
    }
  }
}

TEST(Broadwell, DefaultShapes) {
  const auto h = default_broadwell_config();
  ASSERT_EQ(h.levels.size(), 3u);
  EXPECT_EQ(h.levels[0].capacity, 32768u);
  EXPECT_EQ(h.levels[1].capacity, 262144u);
  EXPECT_EQ(h.levels[2].capacity, 1310720u);
  for (const auto& l : h.levels) EXPECT_EQ(l.line_size, 64u);
  EXPECT_EQ(h.miss_emit_level, 2u);
  EXPECT_NO_THROW(validate(h));
}

TEST(Simulate, RepeatedAddressMissesOnce) {
  std::vector<TraceRecord> t(100, TraceRecord{0x400000, 0x1234});
  const auto r = simulate(t, default_broadwell_config());
  EXPECT_EQ(r.misses.size(), 1u);
  EXPECT_EQ(r.stats.levels[0].hits, 99u);
  EXPECT_EQ(r.stats.levels[0].misses, 1u);
  expect_conservation(r.stats);
}

TEST(Simulate, TwoWaySetEvictsLeastRecentlyUsed) {
  // 2 sets x 2 ways; lines 0, 2, 4 all map to set 0.
  const auto r = simulate(lines_to_trace({0, 2, 4, 0}), single_level(2, 2));
  ASSERT_EQ(r.misses.size(), 4u);
  EXPECT_EQ(r.misses[3].line_addr, 0u);
}

TEST(Simulate, MissRecordsCarryPcAndTraceOrder) {
  const auto t = lines_to_trace({5, 6, 5, 7, 8, 9, 5});
  const auto r = simulate(t, single_level(1, 2));
  // 5 miss, 6 miss, 5 hit, 7 miss (evicts 6), 8 miss (evicts 5), 9 miss,
  // 5 miss.
  const std::vector<std::size_t> missed = {0, 1, 3, 4, 5, 6};
  ASSERT_EQ(r.misses.size(), missed.size());
  for (std::size_t i = 0; i < missed.size(); ++i) {
    EXPECT_EQ(r.misses[i].pc, t[missed[i]].pc);
    EXPECT_EQ(r.misses[i].addr, t[missed[i]].addr);
    EXPECT_EQ(r.misses[i].line_addr, r.misses[i].addr >> 6);
  }
}

TEST(Simulate, StreamingTwiceOverTwiceLlcFootprintAlwaysMissesAtLlc) {
  const auto h = default_broadwell_config();
  const std::uint64_t lines = 2 * h.levels[2].capacity / 64;
  std::vector<TraceRecord> t;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::uint64_t i = 0; i < lines; ++i) t.push_back({0x400000, i * 64});
  }
  const auto r = simulate(t, h);
  EXPECT_EQ(r.misses.size(), t.size());
  expect_conservation(r.stats);
}

TEST(Simulate, MatchesLruStackOracleOnRandomTraces) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::uint64_t sets = std::uint64_t{1} << rng.uniform(3);
    const std::uint64_t ways = 1 + rng.uniform(8);
    const std::uint64_t distinct = 1 + rng.uniform(16);
    std::vector<std::uint64_t> lines(1 + rng.uniform(1000));
    for (auto& l : lines) l = rng.uniform(distinct);
    const auto hits = testing::lru_stack_hits(lines, sets, ways);
    const auto trace = lines_to_trace(lines);
    const auto r = simulate(trace, single_level(sets, ways));
    std::vector<TraceRecord> expected;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (!hits[i]) expected.push_back(trace[i]);
    }
    ASSERT_EQ(to_trace_records(r.misses), expected) << "trial " << trial;
    expect_conservation(r.stats);
  }
}

TEST(Simulate, LargerFullyAssociativeLlcNeverMissesMore) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint64_t> lines(500);
    for (auto& l : lines) l = rng.uniform(64);
    std::size_t prev = SIZE_MAX;
    for (std::uint64_t ways = 1; ways <= 64; ways *= 2) {
      const auto n = simulate(lines_to_trace(lines), single_level(1, ways)).misses.size();
      EXPECT_LE(n, prev);
      prev = n;
    }
  }
}

TEST(Simulate, InnerLevelFlowEqualsOuterMisses) {
  Rng rng(1);
  std::vector<TraceRecord> t;
  for (int i = 0; i < 20000; ++i) t.push_back({0x400000, rng.uniform(1 << 22) * 64});
  const auto r = simulate(t, default_broadwell_config());
  expect_conservation(r.stats);
  EXPECT_EQ(r.misses.size(), r.stats.levels[2].misses);
}

TEST(Validate, RejectsBadGeometry) {
  HierarchyConfig h;
  EXPECT_THROW(validate(h), ConfigError);  // no levels
  h = single_level(2, 2);
  h.levels[0].line_size = 48;
  EXPECT_THROW(validate(h), ConfigError);
  h = single_level(2, 2);
  h.levels[0].capacity = 100;
  EXPECT_THROW(validate(h), ConfigError);
  h = default_broadwell_config();
  h.levels[1].line_size = 128;
  EXPECT_THROW(validate(h), ConfigError);
  h = default_broadwell_config();
  h.miss_emit_level = 3;
  EXPECT_THROW(validate(h), ConfigError);
}

}  // namespace
}  // namespace pfbench
