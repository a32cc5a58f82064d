#pragma once

// Command implementations behind the CLI. Artifacts live under
// <output_dir>/<dataset>/ and each records the config hash that produced
// it. A stage whose inputs are missing or stale (different hash) rebuilds
// them first, except model bundles: eval refuses a bundle from another
// config.

#include <ostream>
#include <string>
#include <vector>

#include "pfbench/config.hpp"
#include "pfbench/eval.hpp"

namespace pfbench {

struct Paths {
  std::string root;
  std::string dataset(const std::string& name) const;
  std::string misses(const std::string& name) const;
  std::string sim_stats(const std::string& name) const;
  std::string vocab_dir(const std::string& name) const;
  std::string cluster_dir(const std::string& name) const;
  std::string model_dir(const std::string& name, const std::string& model) const;
  std::string report(ReportFormat format) const;
};

Paths paths_for(const ExperimentConfig& config);

// Seed for a per-(dataset, model) random stream.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& dataset,
                          const std::string& purpose);

void cmd_simulate(const ExperimentConfig& config, std::ostream& log);
void cmd_vocab(const ExperimentConfig& config, std::ostream& log);
void cmd_cluster(const ExperimentConfig& config, std::ostream& log);
void cmd_train(const ExperimentConfig& config, std::ostream& log);
EvalReport cmd_eval(const ExperimentConfig& config, std::ostream& log);
// Prints the stored report with per-model geometric means.
void cmd_report(const ExperimentConfig& config, std::ostream& out);
void cmd_export_embeddings(const ExperimentConfig& config, std::ostream& log);

}  // namespace pfbench
