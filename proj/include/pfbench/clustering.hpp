#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pfbench/trace.hpp"
#include "pfbench/vocab.hpp"

namespace pfbench {

// 1-D k-means model over (line) addresses. Centroids are kept ascending.
struct ClusterModel {
  std::size_t k = 0;
  std::vector<double> centroids;
  std::size_t iterations = 0;
  double inertia = 0.0;
  // Inertia after every Lloyd iteration; non-increasing.
  std::vector<double> inertia_history;

  // argmin |addr - centroid|, ties to the lower index.
  std::size_t assign(std::uint64_t addr) const;
};

// Lloyd iterations with k-means++ seeding on the multiset of addresses
// (duplicates weigh in by frequency). Empty clusters are reseeded to the
// point farthest from its centroid. Throws ConfigError when there are fewer
// than k distinct addresses.
ClusterModel kmeans_fit(std::span<const std::uint64_t> addresses,
                        std::size_t k, std::size_t max_iters,
                        std::uint64_t seed);

struct NormParams {
  double mean = 0.0;
  double stddev = 1.0;

  friend bool operator==(const NormParams&, const NormParams&) = default;
};

// Miss stream split by cluster, with deltas computed between consecutive
// misses of the same cluster.
struct ClusteredStream {
  std::vector<std::size_t> cluster_of;                  // per miss
  std::vector<std::vector<DeltaRecord>> sub_streams;    // per cluster
  std::vector<NormParams> norms;                        // per cluster
};

// Normalization parameters use only deltas whose both endpoints lie in the
// first `train_prefix` misses (all of them by default). Clusters without
// training deltas get {0, 1}.
ClusteredStream partition_stream(std::span<const MissRecord> misses,
                                 const ClusterModel& model,
                                 std::size_t train_prefix = SIZE_MAX);

NormParams fit_norm(std::span<const Delta> deltas);

// (delta - mean) / stddev; a non-positive stddev is treated as 1.
std::vector<double> normalize_deltas(std::span<const Delta> deltas,
                                     const NormParams& params);
double normalize_delta(Delta delta, const NormParams& params);
std::vector<double> denormalize(std::span<const double> values,
                                const NormParams& params);

// Versioned text file holding k, centroids and per-cluster normalization.
void save_clusters(const std::string& path, const ClusterModel& model,
                   std::span<const NormParams> norms);
void load_clusters(const std::string& path, ClusterModel& model,
                   std::vector<NormParams>& norms);

// CSV of (addr, cluster_id) per miss, for plotting.
void export_cluster_csv(const std::string& path,
                        std::span<const MissRecord> misses,
                        const ClusterModel& model);

}  // namespace pfbench
