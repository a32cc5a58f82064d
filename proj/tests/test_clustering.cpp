#include <cmath>

#include <gtest/gtest.h>

#include "pfbench/clustering.hpp"
#include "pfbench/error.hpp"
#include "pfbench/random.hpp"
#include "test_util.hpp"

namespace pfbench {
namespace {

std::vector<MissRecord> misses_at(const std::vector<std::uint64_t>& lines) {
  std::vector<MissRecord> m;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    m.push_back({i, 0x1000 + i, lines[i] * 64, lines[i]});
  }
  return m;
}

TEST(KMeans, TwoObviousGroups) {
  const std::vector<std::uint64_t> a = {0, 0, 0, 10, 10, 10};
  const auto m = kmeans_fit(a, 2, 100, 1);
  ASSERT_EQ(m.centroids.size(), 2u);
  EXPECT_DOUBLE_EQ(m.centroids[0], 0.0);
  EXPECT_DOUBLE_EQ(m.centroids[1], 10.0);
  EXPECT_DOUBLE_EQ(m.inertia, 0.0);
  EXPECT_EQ(m.assign(3), 0u);
  EXPECT_EQ(m.assign(7), 1u);
  EXPECT_EQ(m.assign(5), 0u);  // tie goes to the lower index
}

TEST(KMeans, SingleClusterIsTheMean) {
  const std::vector<std::uint64_t> a = {1, 2, 3, 10};
  const auto m = kmeans_fit(a, 1, 10, 3);
  EXPECT_DOUBLE_EQ(m.centroids[0], 4.0);
}

TEST(KMeans, DisjointRangesSeparate) {
  std::vector<std::uint64_t> a;
  for (std::uint64_t i = 0; i < 100; ++i) a.push_back(1000 + i);
  for (std::uint64_t i = 0; i < 100; ++i) a.push_back(1'000'000 + i);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = kmeans_fit(a, 2, 100, seed);
    EXPECT_NEAR(m.centroids[0], 1049.5, 1e-9);
    EXPECT_NEAR(m.centroids[1], 1'000'049.5, 1e-9);
  }
}

TEST(KMeans, InertiaNonIncreasingAndCentroidsSorted) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::uint64_t> a;
    for (int i = 0; i < 300; ++i) a.push_back(rng.uniform(1 + rng.uniform(100000)));
    const auto m = kmeans_fit(a, 1 + rng.uniform(8), 50, trial);
    for (std::size_t i = 1; i < m.inertia_history.size(); ++i) {
      EXPECT_LE(m.inertia_history[i], m.inertia_history[i - 1] * (1 + 1e-12));
    }
    EXPECT_TRUE(std::is_sorted(m.centroids.begin(), m.centroids.end()));
  }
}

TEST(KMeans, DeterministicForSeed) {
  Rng rng(8);
  std::vector<std::uint64_t> a;
  for (int i = 0; i < 500; ++i) a.push_back(rng.uniform(1 << 20));
  const auto x = kmeans_fit(a, 6, 100, 42);
  const auto y = kmeans_fit(a, 6, 100, 42);
  EXPECT_EQ(x.centroids, y.centroids);
}

TEST(KMeans, FewerDistinctThanKIsConfigError) {
  const std::vector<std::uint64_t> a = {5, 5, 5, 9};
  EXPECT_THROW(kmeans_fit(a, 3, 10, 0), ConfigError);
}

TEST(Partition, PerClusterDeltas) {
  // A: 100,101,102 and B: 9000,9001, interleaved.
  const auto misses = misses_at({100, 9000, 101, 9001, 102});
  std::vector<std::uint64_t> lines;
  for (const auto& m : misses) lines.push_back(m.line_addr);
  const auto model = kmeans_fit(lines, 2, 100, 0);
  const auto p = partition_stream(misses, model);
  EXPECT_EQ(p.cluster_of, (std::vector<std::size_t>{0, 1, 0, 1, 0}));
  ASSERT_EQ(p.sub_streams[0].size(), 2u);
  EXPECT_EQ(p.sub_streams[0][0].delta, 1);
  EXPECT_EQ(p.sub_streams[0][1].delta, 1);
  EXPECT_EQ(p.sub_streams[0][1].pc, misses[2].pc);
  ASSERT_EQ(p.sub_streams[1].size(), 1u);
  EXPECT_EQ(p.sub_streams[1][0].delta, 1);
  EXPECT_EQ(p.sub_streams[0].size() + p.sub_streams[1].size(),
            misses.size() - 2);
}

TEST(Partition, OneClusterEqualsGlobalDeltas) {
  Rng rng(4);
  std::vector<std::uint64_t> lines;
  for (int i = 0; i < 200; ++i) lines.push_back(rng.uniform(5000));
  const auto misses = misses_at(lines);
  const auto model = kmeans_fit(lines, 1, 10, 0);
  const auto p = partition_stream(misses, model);
  EXPECT_EQ(p.sub_streams[0], compute_deltas(misses));
}

TEST(Partition, NormUsesTrainPrefixOnly) {
  const auto misses = misses_at({0, 2, 4, 1000});
  const auto model = kmeans_fit(std::vector<std::uint64_t>{0, 2}, 1, 10, 0);
  const auto p = partition_stream(misses, model, 3);
  EXPECT_DOUBLE_EQ(p.norms[0].mean, 2.0);
  EXPECT_DOUBLE_EQ(p.norms[0].stddev, 0.0);
}

TEST(Normalize, KnownValues) {
  const std::vector<Delta> d = {1, 3};
  const auto n = fit_norm(d);
  EXPECT_DOUBLE_EQ(n.mean, 2.0);
  EXPECT_DOUBLE_EQ(n.stddev, 1.0);
  EXPECT_EQ(normalize_deltas(d, n), (std::vector<double>{-1.0, 1.0}));
  EXPECT_DOUBLE_EQ(normalize_delta(5, {5.0, 0.0}), 0.0);
}

TEST(Normalize, MatchesTwoPassOracleAndInverts) {
  Rng rng(17);
  std::vector<Delta> d;
  for (int i = 0; i < 1000; ++i) d.push_back(static_cast<Delta>(rng.uniform(2001)) - 1000);
  double mean = 0;
  for (auto v : d) mean += static_cast<double>(v);
  mean /= static_cast<double>(d.size());
  double var = 0;
  for (auto v : d) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  const double sd = std::sqrt(var / static_cast<double>(d.size()));
  const auto n = fit_norm(d);
  EXPECT_NEAR(n.mean, mean, 1e-9);
  EXPECT_NEAR(n.stddev, sd, 1e-9);
  const auto z = normalize_deltas(d, n);
  const auto back = denormalize(z, n);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(back[i], static_cast<double>(d[i]), 1e-9);
  }
}

TEST(Clusters, SaveLoadRoundTrip) {
  testing::TempDir dir;
  ClusterModel m;
  m.k = 2;
  m.centroids = {12.25, 1e12 + 0.5};
  const std::vector<NormParams> norms = {{0.1, 2.5}, {-3.0, 0.0}};
  save_clusters(dir.file("c.txt"), m, norms);
  ClusterModel got;
  std::vector<NormParams> got_norms;
  load_clusters(dir.file("c.txt"), got, got_norms);
  EXPECT_EQ(got.k, 2u);
  EXPECT_EQ(got.centroids, m.centroids);
  EXPECT_EQ(got_norms, norms);
}

}  // namespace
}  // namespace pfbench
