#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "pfbench/error.hpp"
#include "pfbench/synthetic.hpp"

namespace pfbench {
namespace {

std::int64_t delta(const TraceRecord& a, const TraceRecord& b) {
  return static_cast<std::int64_t>(b.addr - a.addr);
}

TEST(Synthetic, StrideProducesArithmeticSequence) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kStride;
  s.start = 0;
  s.strides = {4};
  s.length = 4;
  const auto t = generate_synthetic(s);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[0].addr, 0u);
  EXPECT_EQ(t[1].addr, 4u);
  EXPECT_EQ(t[2].addr, 8u);
  EXPECT_EQ(t[3].addr, 12u);
}

TEST(Synthetic, PcCorrelatedChainedObeysPcToDeltaMap) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kPcCorrelated;
  s.pc_delta_cycles = {{64}, {-128}};
  s.start = 1 << 20;
  s.length = 5000;
  s.seed = 9;
  const auto t = generate_synthetic(s);
  std::set<std::uint64_t> pcs;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    pcs.insert(t[i].pc);
    const auto d = delta(t[i], t[i + 1]);
    if (t[i].pc == s.pc_base) {
      EXPECT_EQ(d, 64);
    } else {
      EXPECT_EQ(t[i].pc, s.pc_base + 4);
      EXPECT_EQ(d, -128);
    }
  }
  EXPECT_EQ(pcs.size(), 2u);
}

TEST(Synthetic, PcCorrelatedPerPcWalksEachCycle) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kPcCorrelated;
  s.pc_delta_cycles = {{4, 4, -8}, {1, 2}, {7}};
  s.layout = PcLayout::kPerPc;
  s.schedule = PcSchedule::kBurst;
  s.burst_length = 5;
  s.start = 1 << 20;
  s.length = 3000;
  const auto t = generate_synthetic(s);
  std::map<std::uint64_t, std::vector<TraceRecord>> by_pc;
  for (const auto& r : t) by_pc[r.pc].push_back(r);
  ASSERT_EQ(by_pc.size(), 3u);
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& rs = by_pc[s.pc_base + 4 * p];
    const auto& cycle = s.pc_delta_cycles[p];
    for (std::size_t i = 0; i + 1 < rs.size(); ++i) {
      EXPECT_EQ(delta(rs[i], rs[i + 1]), cycle[i % cycle.size()]);
    }
  }
  for (std::size_t n = 0; n < t.size(); ++n) {
    EXPECT_EQ(t[n].pc, s.pc_base + 4 * ((n / 5) % 3));
  }
}

TEST(Synthetic, RegionHoppingRegionsDisjointAndDeltasFromOwnSet) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kRegionHopping;
  s.regions = {{1ull << 30, {64, 128, -64}},
               {2ull << 30, {320, 640}},
               {3ull << 30, {-192, 576, 1024}}};
  s.hop_probability = 0.2;
  s.length = 20000;
  s.seed = 5;
  const auto t = generate_synthetic(s);
  std::vector<std::set<std::uint64_t>> addrs(3);
  std::vector<std::uint64_t> last(3, 0);
  std::vector<bool> seen(3, false);
  for (const auto& r : t) {
    const std::size_t region = (r.pc - s.pc_base) / 4;
    ASSERT_LT(region, 3u);
    addrs[region].insert(r.addr);
    const auto& allowed = s.regions[region].deltas;
    const std::uint64_t prev = seen[region] ? last[region] : s.regions[region].base;
    const auto d = static_cast<std::int64_t>(r.addr - prev);
    EXPECT_NE(std::find(allowed.begin(), allowed.end(), d), allowed.end());
    last[region] = r.addr;
    seen[region] = true;
  }
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      for (auto x : addrs[a]) EXPECT_EQ(addrs[b].count(x), 0u);
    }
  }
}

TEST(Synthetic, RegionHoppingRejectsOverlappingReach) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kRegionHopping;
  s.regions = {{0, {64}}, {1000, {64}}};
  s.length = 100;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
}

TEST(Synthetic, LinkedListIsPeriodicOverDistinctNodes) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kLinkedList;
  s.node_count = 50;
  s.heap_slots = 1000;
  s.length = 500;
  s.seed = 2;
  const auto t = generate_synthetic(s);
  std::set<std::uint64_t> nodes;
  for (std::size_t i = 0; i < 50; ++i) nodes.insert(t[i].addr);
  EXPECT_EQ(nodes.size(), 50u);
  for (std::size_t i = 50; i < t.size(); ++i) EXPECT_EQ(t[i].addr, t[i - 50].addr);
}

TEST(Synthetic, PcMarkovNextDeltaIsFunctionOfPcAndLastDelta) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kPcMarkov;
  s.num_deltas = 100;
  s.length = 20000;
  s.start = std::uint64_t{1} << 50;
  s.seed = 3;
  const auto t = generate_synthetic(s);
  const auto values = pc_markov_delta_values(s);
  const std::set<std::int64_t> value_set(values.begin(), values.end());
  EXPECT_EQ(value_set.size(), 100u);
  std::map<std::pair<std::uint64_t, std::int64_t>, std::int64_t> next;
  for (std::size_t n = 1; n + 1 < t.size(); ++n) {
    const auto prev = delta(t[n - 1], t[n]) / 64;
    const auto cur = delta(t[n], t[n + 1]) / 64;
    EXPECT_TRUE(value_set.count(cur));
    const auto [it, fresh] = next.emplace(std::make_pair(t[n].pc, prev), cur);
    if (!fresh) {
      EXPECT_EQ(it->second, cur);
    }
  }
}

TEST(Synthetic, PcMarkovRejectsWrappingStart) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kPcMarkov;
  s.length = 100;
  s.start = 0;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
}

TEST(Synthetic, IdenticalSpecIsBitIdentical) {
  std::vector<SyntheticSpec> specs(4);
  specs[0].kind = SyntheticKind::kMultiStride;
  specs[0].strides = {64, 128, -64};
  specs[1].kind = SyntheticKind::kPcCorrelated;
  specs[1].pc_delta_cycles = {{1, 2}, {3}};
  specs[1].start = 1 << 20;
  specs[2].kind = SyntheticKind::kLinkedList;
  specs[2].node_count = 16;
  specs[3].kind = SyntheticKind::kPcMarkov;
  specs[3].start = std::uint64_t{1} << 50;
  for (auto& s : specs) {
    s.length = 2000;
    s.seed = 77;
    EXPECT_EQ(generate_synthetic(s), generate_synthetic(s)) << to_string(s.kind);
    auto other = s;
    other.seed = 78;
    EXPECT_NE(generate_synthetic(s), generate_synthetic(other)) << to_string(s.kind);
  }
}

TEST(Synthetic, InvalidParametersAreConfigErrors) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kStride;
  s.length = 10;
  EXPECT_THROW(generate_synthetic(s), ConfigError);  // no stride
  s.strides = {0};
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  s.kind = SyntheticKind::kPcCorrelated;
  s.pc_delta_cycles = {{}};
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  EXPECT_THROW(parse_synthetic_kind("zigzag"), ConfigError);
  for (auto k : {SyntheticKind::kStride, SyntheticKind::kMultiStride,
                 SyntheticKind::kPcCorrelated, SyntheticKind::kRegionHopping,
                 SyntheticKind::kLinkedList, SyntheticKind::kPcMarkov}) {
    EXPECT_EQ(parse_synthetic_kind(to_string(k)), k);
  }
}

}  // namespace
}  // namespace pfbench
