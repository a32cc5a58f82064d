#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include "pfbench/error.hpp"
#include "pfbench/random.hpp"
#include "pfbench/vocab.hpp"
#include "test_util.hpp"

namespace pfbench {
namespace {

using testing::TempDir;

std::vector<MissRecord> misses_from_lines(const std::vector<std::uint64_t>& lines) {
  std::vector<MissRecord> m;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    m.push_back({i, 0x400000 + 4 * (i % 3), lines[i] * 64, lines[i]});
  }
  return m;
}

std::vector<DeltaRecord> records_from(const std::vector<Delta>& deltas) {
  std::vector<DeltaRecord> r;
  for (std::size_t i = 0; i < deltas.size(); ++i) r.push_back({i, 0, deltas[i]});
  return r;
}

TEST(ComputeDeltas, UnitStrideInLines) {
  const auto d = compute_deltas(misses_from_lines({0, 1, 2}));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].delta, 1);
  EXPECT_EQ(d[1].delta, 1);
  EXPECT_EQ(d[0].pc, 0x400000u);
  EXPECT_EQ(d[1].timestep, 1u);
}

TEST(ComputeDeltas, NegativeDelta) {
  const auto d = compute_deltas(misses_from_lines({10, 4}));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].delta, -6);
}

TEST(ComputeDeltas, FewerThanTwoMissesIsDataError) {
  EXPECT_THROW(compute_deltas(misses_from_lines({})), DataError);
  EXPECT_THROW(compute_deltas(misses_from_lines({3})), DataError);
}

TEST(DeltaVocab, FrequencyOrderAndInputSuperset) {
  const std::vector<Delta> d = {7, 7, 7, 3};
  const auto v = DeltaVocab::build(d, 1, 1);
  EXPECT_EQ(v.num_output_classes(), 1u);
  EXPECT_EQ(v.num_input_classes(), 2u);
  EXPECT_EQ(v.encode_output(7), 0);
  EXPECT_EQ(v.encode_output(3), DeltaVocab::kOovOutput);
  EXPECT_EQ(v.encode_input(3), 1);
  EXPECT_EQ(v.encode_input(99), v.oov_input());
  EXPECT_EQ(v.input_table_size(), 3u);
}

TEST(DeltaVocab, CountTiesBreakByAscendingDelta) {
  const std::vector<Delta> d = {5, 5, 2, 2};
  const auto v = DeltaVocab::build(d, 2, 1);
  EXPECT_EQ(v.decode(0), 2);
  EXPECT_EQ(v.decode(1), 5);
}

TEST(DeltaVocab, MinCountFiltersInputsButNotOutputs) {
  std::vector<Delta> d(10, 1);
  d.insert(d.end(), 9, 2);
  d.insert(d.end(), 3, 4);
  const auto v = DeltaVocab::build(d, 1);
  EXPECT_EQ(v.num_output_classes(), 1u);
  EXPECT_EQ(v.num_input_classes(), 1u);  // 2 and 4 appear fewer than 10 times
  const auto w = DeltaVocab::build(d, 3);
  EXPECT_EQ(w.num_input_classes(), 3u);  // outputs are always inputs
}

TEST(DeltaVocab, HalfMassDeltaCoversHalf) {
  const std::vector<Delta> d = {1, 1, 1, 2, 3, 4};
  const auto v = DeltaVocab::build(d, 10, 1);
  EXPECT_DOUBLE_EQ(v.output_coverage(1), 0.5);
  EXPECT_DOUBLE_EQ(v.output_coverage(4), 1.0);
}

TEST(DeltaVocab, CoverageNonDecreasingAndEncodeDecodeRoundTrip) {
  Rng rng(12);
  std::vector<Delta> d;
  for (int i = 0; i < 5000; ++i) {
    d.push_back(static_cast<Delta>(rng.uniform(rng.uniform(2) ? 8 : 200)) - 50);
  }
  const auto v = DeltaVocab::build(d, 50000, 1);
  double prev = 0;
  for (std::size_t m = 1; m <= v.num_output_classes(); ++m) {
    const auto w = DeltaVocab::build(d, m, 1);
    EXPECT_GE(w.output_coverage(), prev);
    prev = w.output_coverage();
  }
  EXPECT_DOUBLE_EQ(prev, 1.0);
  for (std::size_t id = 0; id < v.num_input_classes(); ++id) {
    EXPECT_EQ(v.encode_input(v.decode(static_cast<ClassId>(id))),
              static_cast<ClassId>(id));
  }
  EXPECT_EQ(DeltaVocab::build(d, 20, 1), DeltaVocab::build(d, 20, 1));
}

TEST(DeltaVocab, EncodeSpanBySide) {
  const auto v = DeltaVocab::build(std::vector<Delta>{4, 4, 4, 9, 9, 1}, 2, 1);
  const std::vector<Delta> q = {4, 1, 9, 100};
  EXPECT_EQ(v.encode(q, VocabSide::kOutput),
            (std::vector<ClassId>{0, DeltaVocab::kOovOutput, 1, DeltaVocab::kOovOutput}));
  EXPECT_EQ(v.encode(q, VocabSide::kInput),
            (std::vector<ClassId>{0, 2, 1, v.oov_input()}));
}

TEST(DeltaVocab, BuildPreconditions) {
  EXPECT_THROW(DeltaVocab::build(std::vector<Delta>{}), DataError);
  EXPECT_THROW(DeltaVocab::build(std::vector<Delta>{1}, 0, 1), ConfigError);
  EXPECT_THROW(DeltaVocab::build(std::vector<Delta>{1}, 1, 0), ConfigError);
}

TEST(DeltaVocab, SaveLoadRoundTrip) {
  TempDir dir;
  std::vector<Delta> d = {1, 1, 1, 2, 2, -7, 30, 30, 30, 30};
  const auto v = DeltaVocab::build(d, 2, 2);
  v.save(dir.file("v.txt"));
  EXPECT_EQ(DeltaVocab::load(dir.file("v.txt")), v);
  v.export_csv(dir.file("v.csv"));
}

TEST(PcVocab, FrequencyOrderedWithOovSlot) {
  const std::vector<std::uint64_t> pcs = {0x10, 0x20, 0x20, 0x30, 0x20, 0x10};
  const auto v = PcVocab::build(pcs);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.encode(0x20), 0);
  EXPECT_EQ(v.encode(0x10), 1);
  EXPECT_EQ(v.encode(0x99), v.oov());
  TempDir dir;
  v.save(dir.file("p.txt"));
  EXPECT_EQ(PcVocab::load(dir.file("p.txt")), v);
}

TEST(Coverage, SingleDeltaStream) {
  const auto m = misses_from_lines({0, 1, 2, 3, 4});
  const auto s = coverage_stats(m, compute_deltas(m));
  EXPECT_EQ(s.num_unique_deltas, 1u);
  EXPECT_EQ(s.deltas_for_50pct_mass, 1u);
  EXPECT_EQ(s.num_misses, 5u);
  EXPECT_EQ(s.num_unique_addrs, 5u);
  EXPECT_EQ(s.addrs_for_50pct_mass, 3u);
  EXPECT_EQ(s.num_unique_pcs, 3u);
}

TEST(Coverage, UniformOverTenDeltasNeedsFive) {
  std::vector<Delta> d;
  for (int rep = 0; rep < 7; ++rep) {
    for (Delta v = 1; v <= 10; ++v) d.push_back(v * 3);
  }
  const auto s = coverage_stats(misses_from_lines({0, 1}), records_from(d));
  EXPECT_EQ(s.num_unique_deltas, 10u);
  EXPECT_EQ(s.deltas_for_50pct_mass, 5u);
}

TEST(Coverage, MassPrefixMatchesRecountOracle) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint64_t> counts(1 + rng.uniform(30));
    for (auto& c : counts) c = 1 + rng.uniform(100);
    auto sorted = counts;
    std::sort(sorted.rbegin(), sorted.rend());
    std::uint64_t total = 0;
    for (auto c : sorted) total += c;
    std::uint64_t run = 0, expect = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      run += sorted[i];
      if (2 * run >= total) {
        expect = i + 1;
        break;
      }
    }
    EXPECT_EQ(mass_prefix_length(counts), expect);
  }
}

}  // namespace
}  // namespace pfbench
