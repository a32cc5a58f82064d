// pfbench: config-driven prefetcher experiments.
//
// Exit codes: 0 success, 1 usage error, 2 data/config/I-O error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pfbench/config.hpp"
#include "pfbench/error.hpp"
#include "pfbench/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Memory-prefetcher workbench: LSTM and classical prefetchers"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  app.add_option("--seed", seed, "Override the global seed");
  app.add_option("--workers", workers, "Datasets processed in parallel")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Override the output directory");

  const char* commands[][2] = {
      {"simulate", "Extract LLC miss streams from traces"},
      {"vocab", "Build delta/PC vocabularies and coverage statistics"},
      {"cluster", "Fit k-means address clusters"},
      {"train", "Train the selected models"},
      {"eval", "Score models and baselines on the test split"},
      {"report", "Print the stored report with geometric means"},
      {"export-embeddings", "Write learned (PC, delta) embeddings as CSV"},
  };
  for (const auto& c : commands) app.add_subcommand(c[0], c[1]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    pfbench::ExperimentConfig config = pfbench::load_config(config_path);
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;
    if (out_dir) config.output_dir = *out_dir;
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "simulate") {
      pfbench::cmd_simulate(config, std::cerr);
    } else if (cmd == "vocab") {
      pfbench::cmd_vocab(config, std::cerr);
    } else if (cmd == "cluster") {
      pfbench::cmd_cluster(config, std::cerr);
    } else if (cmd == "train") {
      pfbench::cmd_train(config, std::cerr);
    } else if (cmd == "eval") {
      pfbench::cmd_eval(config, std::cerr);
    } else if (cmd == "report") {
      pfbench::cmd_report(config, std::cout);
    } else {
      pfbench::cmd_export_embeddings(config, std::cerr);
    }
  } catch (const pfbench::Error& e) {
    std::cerr << "pfbench: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pfbench: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
