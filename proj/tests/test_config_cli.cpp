#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "pfbench/config.hpp"
#include "pfbench/error.hpp"
#include "pfbench/pipeline.hpp"
#include "test_util.hpp"

namespace pfbench {
namespace {

namespace fs = std::filesystem;

// A tiny end-to-end experiment: one synthetic stride dataset, no cache
// simulation, small models and few steps.
nlohmann::json smoke_config(const std::string& out_dir) {
  return {
      {"datasets",
       {{{"name", "stride"},
         {"synthetic",
          {{"kind", "multi-stride"}, {"length", 400}, {"strides", {1, 2}}, {"seed", 3}}}}}},
      {"hierarchy", {{"bypass", true}}},
      {"vocab", {{"min_count", 1}}},
      {"clustering", {{"k", 2}, {"iters", 20}}},
      {"models",
       {{"selected", {"embedding", "embedding_pc_only", "cluster"}},
        {"embedding", {{"embedding_dim", 8}, {"hidden", 8}, {"layers", 1}, {"steps", 20}}},
        {"cluster", {{"hidden", 8}, {"layers", 1}, {"steps", 20}}}}},
      {"train", {{"batch_size", 4}, {"seq_len", 8}}},
      {"output_dir", out_dir},
      {"seed", 5}};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Config, DefaultsForMinimalDocument) {
  const auto c = parse_config(R"({"datasets": [{"name": "a", "trace": "t.bin"}]})");
  ASSERT_EQ(c.datasets.size(), 1u);
  EXPECT_EQ(c.datasets[0].trace_path.value(), "t.bin");
  EXPECT_EQ(c.vocab.max_output, 50000u);
  EXPECT_EQ(c.vocab.min_count, 10u);
  EXPECT_EQ(c.clustering.k, 12u);
  EXPECT_EQ(c.models.embedding.hidden, 128);
  EXPECT_EQ(c.models.embedding.layers, 2u);
  EXPECT_DOUBLE_EQ(c.models.embedding.lr, 0.001);
  EXPECT_EQ(c.models.cluster.optimizer, nn::OptimizerKind::kAdagrad);
  EXPECT_EQ(c.train.seq_len, 64u);
  EXPECT_EQ(c.eval.k, 10u);
  EXPECT_DOUBLE_EQ(c.eval.split.train_fraction, 0.7);
  EXPECT_FALSE(c.hierarchy.bypass);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(R"({"datasets": [], "bogus": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"datasets": [{"name": "a", "trace": "t", "extra": 0}]})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"datasets": [{"name": "a"}]})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  auto j = smoke_config("x");
  j["models"]["selected"] = {"transformer"};
  EXPECT_THROW(parse_config(j.dump()), ConfigError);
}

TEST(Config, RoundTripsThroughJson) {
  const auto c = parse_config(smoke_config("out").dump());
  const auto again = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
  EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(Config, HashIgnoresWorkersAndOutputDir) {
  auto a = parse_config(smoke_config("one").dump());
  auto b = parse_config(smoke_config("two").dump());
  b.workers = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 6;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Pipeline, DeriveSeedSeparatesPurposes) {
  EXPECT_EQ(derive_seed(1, "a", "embedding"), derive_seed(1, "a", "embedding"));
  EXPECT_NE(derive_seed(1, "a", "embedding"), derive_seed(1, "a", "cluster"));
  EXPECT_NE(derive_seed(1, "a", "embedding"), derive_seed(2, "a", "embedding"));
  EXPECT_NE(derive_seed(1, "a", "embedding"), derive_seed(1, "b", "embedding"));
}

TEST(Pipeline, EndToEndProducesArtifacts) {
  testing::TempDir dir;
  const auto config = parse_config(smoke_config(dir.file("out")).dump());
  std::ostringstream log;
  cmd_train(config, log);  // regenerates misses, vocab and clusters on demand
  const auto report = cmd_eval(config, log);
  ASSERT_EQ(report.rows.size(), 5u);
  EXPECT_EQ(report.rows[3].model, "stream");
  EXPECT_EQ(report.rows[4].model, "ghb");
  const auto paths = paths_for(config);
  EXPECT_TRUE(fs::exists(paths.misses("stride")));
  EXPECT_TRUE(fs::exists(paths.report(ReportFormat::kCsv)));
  const auto parsed = parse_report_json(slurp(paths.report(ReportFormat::kJson)));
  EXPECT_EQ(parsed.config_hash, config_hash(config));
  std::ostringstream out;
  cmd_report(config, out);
  EXPECT_NE(out.str().find("geomean"), std::string::npos);
  cmd_export_embeddings(config, log);
  EXPECT_TRUE(fs::exists(paths.model_dir("stride", "embedding") + "/embeddings.csv"));
}

TEST(Pipeline, EvalRefusesBundleFromAnotherConfig) {
  testing::TempDir dir;
  auto j = smoke_config(dir.file("out"));
  j["models"]["selected"] = {"embedding"};
  const auto config = parse_config(j.dump());
  std::ostringstream log;
  cmd_train(config, log);
  j["models"]["embedding"]["lr"] = 0.5;
  EXPECT_THROW(cmd_eval(parse_config(j.dump()), log), ConfigError);
}

TEST(Pipeline, EvalWithoutTrainingIsDataError) {
  testing::TempDir dir;
  auto j = smoke_config(dir.file("out"));
  j["models"]["selected"] = {"embedding"};
  std::ostringstream log;
  EXPECT_THROW(cmd_eval(parse_config(j.dump()), log), DataError);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PFBENCH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir;
  const std::string cfg = dir.file("c.json");
  {
    auto j = smoke_config(dir.file("out"));
    j["models"]["selected"] = nlohmann::json::array();
    std::ofstream(cfg) << j.dump(2);
  }
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("--config " + cfg), 1);              // no subcommand
  EXPECT_EQ(run_cli("--config " + cfg + " fly"), 1);     // unknown subcommand
  EXPECT_EQ(run_cli("--config " + dir.file("missing.json") + " simulate"), 2);
  EXPECT_EQ(run_cli("--config " + cfg + " report"), 2);  // nothing evaluated yet
  EXPECT_EQ(run_cli("--config " + cfg + " simulate"), 0);
  EXPECT_EQ(run_cli("--config " + cfg + " --workers 2 eval"), 0);
  EXPECT_EQ(run_cli("--config " + cfg + " report"), 0);
  EXPECT_EQ(run_cli("--config " + cfg + " --seed 9 report"), 2);  // stale report
}

}  // namespace
}  // namespace pfbench
