#include "pfbench/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "pfbench/error.hpp"
#include "pfbench/random.hpp"

namespace pfbench {
namespace {

constexpr const char* kClusterMagic = "pfclusters";
constexpr int kClusterVersion = 1;

struct WeightedPoints {
  std::vector<double> value;
  std::vector<double> weight;
};

WeightedPoints compress(std::span<const std::uint64_t> addresses) {
  std::map<std::uint64_t, std::uint64_t> counts;
  for (auto a : addresses) ++counts[a];
  WeightedPoints pts;
  pts.value.reserve(counts.size());
  pts.weight.reserve(counts.size());
  for (const auto& [a, c] : counts) {
    pts.value.push_back(static_cast<double>(a));
    pts.weight.push_back(static_cast<double>(c));
  }
  return pts;
}

std::size_t nearest(double x, const std::vector<double>& centroids) {
  std::size_t best = 0;
  double best_dist = std::abs(x - centroids[0]);
  for (std::size_t j = 1; j < centroids.size(); ++j) {
    const double d = std::abs(x - centroids[j]);
    if (d < best_dist) {
      best = j;
      best_dist = d;
    }
  }
  return best;
}

// Weighted draw proportional to `mass`.
std::size_t draw(const std::vector<double>& mass, Rng& rng) {
  long double total = 0;
  for (double m : mass) total += m;
  const long double target = static_cast<long double>(rng.unit()) * total;
  long double running = 0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0) continue;
    running += mass[i];
    last_positive = i;
    if (running > target) return i;
  }
  return last_positive;
}

std::vector<double> kmeanspp(const WeightedPoints& pts, std::size_t k,
                             Rng& rng) {
  const std::size_t n = pts.value.size();
  std::vector<double> centroids{pts.value[draw(pts.weight, rng)]};
  std::vector<double> d2(n);
  while (centroids.size() < k) {
    std::vector<double> mass(n);
    for (std::size_t i = 0; i < n; ++i) {
      double best = INFINITY;
      for (double c : centroids) {
        best = std::min(best, (pts.value[i] - c) * (pts.value[i] - c));
      }
      mass[i] = pts.weight[i] * best;
    }
    centroids.push_back(pts.value[draw(mass, rng)]);
  }
  std::sort(centroids.begin(), centroids.end());
  return centroids;
}

double inertia_of(const WeightedPoints& pts,
                  const std::vector<std::size_t>& assignment,
                  const std::vector<double>& centroids) {
  long double j = 0;
  for (std::size_t i = 0; i < pts.value.size(); ++i) {
    const long double d = pts.value[i] - centroids[assignment[i]];
    j += pts.weight[i] * d * d;
  }
  return static_cast<double>(j);
}

std::vector<std::size_t> assign_all(const WeightedPoints& pts,
                                    const std::vector<double>& centroids) {
  std::vector<std::size_t> a(pts.value.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = nearest(pts.value[i], centroids);
  }
  return a;
}

}  // namespace

std::size_t ClusterModel::assign(std::uint64_t addr) const {
  return nearest(static_cast<double>(addr), centroids);
}

ClusterModel kmeans_fit(std::span<const std::uint64_t> addresses,
                        std::size_t k, std::size_t max_iters,
                        std::uint64_t seed) {
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  const WeightedPoints pts = compress(addresses);
  if (pts.value.size() < k) {
    throw ConfigError(fmt::format(
        "k-means needs at least k={} distinct addresses, got {}", k,
        pts.value.size()));
  }
  Rng rng(seed);
  ClusterModel model;
  model.k = k;
  model.centroids = kmeanspp(pts, k, rng);
  auto assignment = assign_all(pts, model.centroids);
  model.inertia_history.push_back(
      inertia_of(pts, assignment, model.centroids));

  for (std::size_t it = 1; it <= max_iters; ++it) {
    std::vector<long double> sum(k, 0), mass(k, 0);
    for (std::size_t i = 0; i < pts.value.size(); ++i) {
      sum[assignment[i]] += pts.weight[i] * static_cast<long double>(pts.value[i]);
      mass[assignment[i]] += pts.weight[i];
    }
    std::vector<double> next(k);
    bool reseeded = false;
    std::vector<bool> taken(pts.value.size(), false);
    for (std::size_t j = 0; j < k; ++j) {
      if (mass[j] > 0) {
        next[j] = static_cast<double>(sum[j] / mass[j]);
        continue;
      }
      // Farthest point from its current centroid becomes the new centroid.
      double worst = -1;
      std::size_t pick = 0;
      for (std::size_t i = 0; i < pts.value.size(); ++i) {
        const double d = std::abs(pts.value[i] - model.centroids[assignment[i]]);
        if (!taken[i] && d > worst) {
          worst = d;
          pick = i;
        }
      }
      taken[pick] = true;
      next[j] = pts.value[pick];
      reseeded = true;
    }
    std::sort(next.begin(), next.end());
    auto next_assignment = assign_all(pts, next);
    const bool stable = !reseeded && next_assignment == assignment;
    model.centroids = std::move(next);
    assignment = std::move(next_assignment);
    model.inertia_history.push_back(
        inertia_of(pts, assignment, model.centroids));
    model.iterations = it;
    if (stable) break;
  }
  model.inertia = model.inertia_history.back();
  return model;
}

ClusteredStream partition_stream(std::span<const MissRecord> misses,
                                 const ClusterModel& model,
                                 std::size_t train_prefix) {
  ClusteredStream out;
  out.cluster_of.resize(misses.size());
  out.sub_streams.resize(model.k);
  std::vector<std::vector<Delta>> train_deltas(model.k);
  std::vector<std::size_t> last(model.k, SIZE_MAX);
  for (std::size_t i = 0; i < misses.size(); ++i) {
    const std::size_t c = model.assign(misses[i].line_addr);
    out.cluster_of[i] = c;
    if (last[c] != SIZE_MAX) {
      const auto& prev = misses[last[c]];
      const auto delta =
          static_cast<Delta>(misses[i].line_addr - prev.line_addr);
      out.sub_streams[c].push_back({prev.timestep, prev.pc, delta});
      if (i < train_prefix) train_deltas[c].push_back(delta);
    }
    last[c] = i;
  }
  out.norms.reserve(model.k);
  for (const auto& d : train_deltas) {
    out.norms.push_back(d.empty() ? NormParams{} : fit_norm(d));
  }
  return out;
}

NormParams fit_norm(std::span<const Delta> deltas) {
  if (deltas.empty()) return {};
  long double sum = 0;
  for (Delta d : deltas) sum += static_cast<long double>(d);
  const long double mean = sum / deltas.size();
  long double sq = 0;
  for (Delta d : deltas) {
    const long double x = static_cast<long double>(d) - mean;
    sq += x * x;
  }
  return {static_cast<double>(mean),
          static_cast<double>(std::sqrt(sq / deltas.size()))};
}

double normalize_delta(Delta delta, const NormParams& params) {
  const double scale = params.stddev > 0 ? params.stddev : 1.0;
  return (static_cast<double>(delta) - params.mean) / scale;
}

std::vector<double> normalize_deltas(std::span<const Delta> deltas,
                                     const NormParams& params) {
  std::vector<double> out;
  out.reserve(deltas.size());
  for (Delta d : deltas) out.push_back(normalize_delta(d, params));
  return out;
}

std::vector<double> denormalize(std::span<const double> values,
                                const NormParams& params) {
  const double scale = params.stddev > 0 ? params.stddev : 1.0;
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(v * scale + params.mean);
  return out;
}

void save_clusters(const std::string& path, const ClusterModel& model,
                   std::span<const NormParams> norms) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  out << fmt::format("{} {}\nk {} iterations {} inertia {}\n", kClusterMagic,
                     kClusterVersion, model.k, model.iterations,
                     model.inertia);
  for (std::size_t j = 0; j < model.k; ++j) {
    const NormParams n = j < norms.size() ? norms[j] : NormParams{};
    out << fmt::format("{} {} {}\n", model.centroids[j], n.mean, n.stddev);
  }
  if (!out) throw IoError(fmt::format("write failed on '{}'", path));
}

void load_clusters(const std::string& path, ClusterModel& model,
                   std::vector<NormParams>& norms) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::string magic, key;
  int version = 0;
  in >> magic >> version;
  if (magic != kClusterMagic || version != kClusterVersion) {
    throw FormatError(fmt::format("'{}' is not a cluster model", path));
  }
  model = ClusterModel{};
  in >> key >> model.k >> key >> model.iterations >> key >> model.inertia;
  norms.assign(model.k, NormParams{});
  model.centroids.resize(model.k);
  for (std::size_t j = 0; j < model.k; ++j) {
    if (!(in >> model.centroids[j] >> norms[j].mean >> norms[j].stddev)) {
      throw ParseError("truncated cluster model", j + 3,
                       ParseError::OffsetKind::kLine);
    }
  }
  model.inertia_history = {model.inertia};
}

void export_cluster_csv(const std::string& path,
                        std::span<const MissRecord> misses,
                        const ClusterModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  out << "timestep,addr,line_addr,cluster_id\n";
  for (const auto& m : misses) {
    out << fmt::format("{},{:#x},{},{}\n", m.timestep, m.addr, m.line_addr,
                       model.assign(m.line_addr));
  }
}

}  // namespace pfbench
