#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pfbench/baselines.hpp"
#include "pfbench/cachesim.hpp"
#include "pfbench/eval.hpp"
#include "pfbench/optim.hpp"
#include "pfbench/synthetic.hpp"
#include "pfbench/trace.hpp"

namespace pfbench {

// Exactly one of `trace_path` / `synthetic` is set.
struct DatasetConfig {
  std::string name;
  std::optional<std::string> trace_path;
  TraceFormat format = TraceFormat::kBinary;
  std::optional<SyntheticSpec> synthetic;
};

struct HierarchySection {
  // Treat every trace record as an LLC miss (no simulation).
  bool bypass = false;
  HierarchyConfig hierarchy = default_broadwell_config();
};

struct VocabParams {
  std::size_t max_output = 50000;
  std::uint64_t min_count = 10;
};

struct ClusteringParams {
  std::size_t k = 12;
  std::size_t iters = 100;
  std::uint64_t seed = 0;
  std::size_t max_output_per_cluster = 50000;
};

struct EmbeddingHyper {
  std::int64_t embedding_dim = 128;
  std::int64_t hidden = 128;
  std::size_t layers = 2;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdam;
  double lr = 0.001;
  std::uint64_t steps = 500000;
};

struct ClusterHyper {
  std::int64_t hidden = 128;
  std::size_t layers = 2;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdagrad;
  double lr = 0.1;
  std::uint64_t steps = 250000;
};

// Selectable model names.
inline const std::vector<std::string> kModelNames = {
    "embedding", "embedding_pc_only", "embedding_delta_only", "cluster"};

struct ModelsSection {
  std::vector<std::string> selected = {"embedding", "cluster"};
  EmbeddingHyper embedding;
  ClusterHyper cluster;
};

struct TrainParams {
  std::size_t batch_size = 64;
  std::size_t seq_len = 64;
  double clip_norm = 5.0;
  bool float64 = false;  // scalar type for training and inference
};

struct EvalParams {
  std::size_t k = 10;
  SplitSpec split;
};

struct BaselineParams {
  bool enabled = true;
  StreamConfig stream;
  GhbConfig ghb;
};

struct ExperimentConfig {
  std::vector<DatasetConfig> datasets;
  HierarchySection hierarchy;
  VocabParams vocab;
  ClusteringParams clustering;
  ModelsSection models;
  TrainParams train;
  EvalParams eval;
  BaselineParams baselines;
  std::string output_dir = "pfbench_out";
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

// Parses and validates a config document. Missing fields take defaults;
// unknown fields are rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

// FNV-1a of the canonical JSON, excluding `workers` and `output_dir`
// (neither affects results), as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace pfbench
