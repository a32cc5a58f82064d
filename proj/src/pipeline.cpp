#include "pfbench/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "pfbench/baselines.hpp"
#include "pfbench/bundle.hpp"
#include "pfbench/cachesim.hpp"
#include "pfbench/checkpoint.hpp"
#include "pfbench/clustering.hpp"
#include "pfbench/models.hpp"
#include "pfbench/synthetic.hpp"
#include "pfbench/vocab.hpp"

namespace pfbench {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string Paths::dataset(const std::string& name) const {
  return root + "/" + name;
}
std::string Paths::misses(const std::string& name) const {
  return dataset(name) + "/misses.bin";
}
std::string Paths::sim_stats(const std::string& name) const {
  return dataset(name) + "/sim_stats.json";
}
std::string Paths::vocab_dir(const std::string& name) const {
  return dataset(name) + "/vocab";
}
std::string Paths::cluster_dir(const std::string& name) const {
  return dataset(name) + "/clusters";
}
std::string Paths::model_dir(const std::string& name,
                             const std::string& model) const {
  return dataset(name) + "/models/" + model;
}
std::string Paths::report(ReportFormat format) const {
  return root + (format == ReportFormat::kCsv ? "/report.csv" : "/report.json");
}

Paths paths_for(const ExperimentConfig& config) { return {config.output_dir}; }

std::uint64_t derive_seed(std::uint64_t seed, const std::string& dataset,
                          const std::string& purpose) {
  return fnv1a64(fmt::format("{}/{}/{}", seed, dataset, purpose));
}

namespace {

std::mutex log_mutex;

template <typename... Args>
void say(std::ostream& log, fmt::format_string<Args...> f, Args&&... args) {
  std::lock_guard lock(log_mutex);
  log << fmt::format(f, std::forward<Args>(args)...) << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path));
  out << text;
  if (!out) throw IoError(fmt::format("write to {} failed", path));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir, ec.message()));
}

// True when `path` is a JSON stamp written by the current config.
bool stamp_matches(const std::string& path, const std::string& hash) {
  if (!fs::exists(path)) return false;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    return j.value("config_hash", "") == hash;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

// Runs fn(dataset) for every dataset on up to `workers` threads; rethrows the
// first failure in dataset order.
template <typename F>
void for_each_dataset(const ExperimentConfig& config, F&& fn) {
  const std::size_t n = config.datasets.size();
  if (n == 0) throw ConfigError("config lists no datasets");
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(config.datasets[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(config.workers, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t line_size_of(const ExperimentConfig& config) {
  return config.hierarchy.hierarchy.levels.empty()
             ? 64
             : config.hierarchy.hierarchy.line_size();
}

// ---------------------------------------------------------------------------
// Stages

std::vector<MissRecord> simulate_dataset(const ExperimentConfig& config,
                                         const DatasetConfig& ds,
                                         std::ostream& log) {
  const Paths paths = paths_for(config);
  const std::string hash = config_hash(config);
  make_dirs(paths.dataset(ds.name));
  const std::vector<TraceRecord> records =
      ds.synthetic ? generate_synthetic(*ds.synthetic)
                   : read_trace(*ds.trace_path, ds.format);
  if (records.empty()) {
    throw DataError(fmt::format("dataset '{}' has an empty trace", ds.name));
  }
  std::vector<MissRecord> misses;
  ordered_json levels = ordered_json::array();
  if (config.hierarchy.bypass) {
    misses = to_miss_stream(records, line_size_of(config));
  } else {
    SimResult r = simulate(records, config.hierarchy.hierarchy);
    for (const auto& l : r.stats.levels) {
      levels.push_back(
          {{"accesses", l.accesses}, {"hits", l.hits}, {"misses", l.misses}});
    }
    misses = std::move(r.misses);
  }
  write_misses(misses, paths.misses(ds.name));
  export_scatter(paths.dataset(ds.name) + "/scatter.csv", misses);
  ordered_json stats = {{"config_hash", hash},
                        {"dataset", ds.name},
                        {"records", records.size()},
                        {"misses", misses.size()},
                        {"bypass", config.hierarchy.bypass},
                        {"levels", levels},
                        {"misses_file_hash",
                         hex64(hash_file(paths.misses(ds.name)))}};
  write_text(paths.sim_stats(ds.name), stats.dump(2) + "\n");
  say(log, "[{}] simulate: {} records -> {} misses", ds.name, records.size(),
      misses.size());
  return misses;
}

std::vector<MissRecord> ensure_misses(const ExperimentConfig& config,
                                      const DatasetConfig& ds,
                                      std::ostream& log) {
  const Paths paths = paths_for(config);
  if (stamp_matches(paths.sim_stats(ds.name), config_hash(config)) &&
      fs::exists(paths.misses(ds.name))) {
    return read_misses(paths.misses(ds.name));
  }
  return simulate_dataset(config, ds, log);
}

std::span<const MissRecord> train_part(const ExperimentConfig& config,
                                       const std::vector<MissRecord>& misses) {
  const std::size_t cut = split_point(misses.size(), config.eval.split);
  return std::span<const MissRecord>(misses).first(cut);
}

std::span<const MissRecord> test_part(const ExperimentConfig& config,
                                      const std::vector<MissRecord>& misses) {
  const std::size_t cut = split_point(misses.size(), config.eval.split);
  return std::span<const MissRecord>(misses).subspan(cut);
}

struct VocabArtifacts {
  PcVocab pcs;
  DeltaVocab deltas;
};

VocabArtifacts build_vocab(const ExperimentConfig& config,
                           const DatasetConfig& ds,
                           const std::vector<MissRecord>& misses,
                           std::ostream& log) {
  const Paths paths = paths_for(config);
  const std::string dir = paths.vocab_dir(ds.name);
  make_dirs(dir);
  const auto train = train_part(config, misses);
  const auto train_deltas = compute_deltas(train);
  VocabArtifacts v;
  v.deltas = DeltaVocab::build(delta_values(train_deltas),
                               config.vocab.max_output, config.vocab.min_count);
  std::vector<std::uint64_t> pcs;
  for (const auto& m : train) pcs.push_back(m.pc);
  v.pcs = PcVocab::build(pcs);
  v.deltas.save(dir + "/delta_vocab.txt");
  v.deltas.export_csv(dir + "/delta_vocab.csv");
  v.pcs.save(dir + "/pc_vocab.txt");

  const auto all_deltas = compute_deltas(misses);
  const CoverageStats s = coverage_stats(misses, all_deltas);
  ordered_json j = {
      {"config_hash", config_hash(config)},
      {"dataset", ds.name},
      {"num_misses", s.num_misses},
      {"num_unique_pcs", s.num_unique_pcs},
      {"num_unique_addrs", s.num_unique_addrs},
      {"num_unique_deltas", s.num_unique_deltas},
      {"addrs_for_50pct_mass", s.addrs_for_50pct_mass},
      {"deltas_for_50pct_mass", s.deltas_for_50pct_mass},
      {"output_classes", v.deltas.num_output_classes()},
      {"input_classes", v.deltas.num_input_classes()},
      {"train_output_coverage", v.deltas.output_coverage()},
      {"delta_vocab_hash", hex64(hash_file(dir + "/delta_vocab.txt"))},
      {"pc_vocab_hash", hex64(hash_file(dir + "/pc_vocab.txt"))}};
  write_text(dir + "/coverage.json", j.dump(2) + "\n");
  say(log,
      "[{}] vocab: {} misses, {} PCs, {} addrs, {} deltas, 50% mass in {} "
      "addrs / {} deltas; {} output classes",
      ds.name, s.num_misses, s.num_unique_pcs, s.num_unique_addrs,
      s.num_unique_deltas, s.addrs_for_50pct_mass, s.deltas_for_50pct_mass,
      v.deltas.num_output_classes());
  return v;
}

VocabArtifacts ensure_vocab(const ExperimentConfig& config,
                            const DatasetConfig& ds,
                            const std::vector<MissRecord>& misses,
                            std::ostream& log) {
  const std::string dir = paths_for(config).vocab_dir(ds.name);
  if (stamp_matches(dir + "/coverage.json", config_hash(config))) {
    return {PcVocab::load(dir + "/pc_vocab.txt"),
            DeltaVocab::load(dir + "/delta_vocab.txt")};
  }
  return build_vocab(config, ds, misses, log);
}

ClusterContext build_clusters(const ExperimentConfig& config,
                              const DatasetConfig& ds,
                              const std::vector<MissRecord>& misses,
                              std::ostream& log) {
  const std::string dir = paths_for(config).cluster_dir(ds.name);
  make_dirs(dir);
  const auto train = train_part(config, misses);
  std::vector<std::uint64_t> lines;
  lines.reserve(train.size());
  for (const auto& m : train) lines.push_back(m.line_addr);
  const std::uint64_t seed = config.clustering.seed
                                 ? config.clustering.seed
                                 : derive_seed(config.seed, ds.name, "kmeans");
  ClusterModel km =
      kmeans_fit(lines, config.clustering.k, config.clustering.iters, seed);
  ClusterContext ctx = build_cluster_context(
      train, km, config.clustering.max_output_per_cluster);
  BundleManifest m;
  save_cluster_context(dir, ctx, m);
  export_cluster_csv(dir + "/assignments.csv", misses, ctx.kmeans);
  ordered_json sizes = ordered_json::array();
  for (const auto& v : ctx.vocabs) sizes.push_back(v.num_output_classes());
  ordered_json j = {{"config_hash", config_hash(config)},
                    {"dataset", ds.name},
                    {"k", ctx.kmeans.k},
                    {"iterations", ctx.kmeans.iterations},
                    {"inertia", ctx.kmeans.inertia},
                    {"cluster_vocab_sizes", sizes},
                    {"files", m.files}};
  write_text(dir + "/clusters.json", j.dump(2) + "\n");
  say(log, "[{}] cluster: k={} after {} iterations, inertia {}", ds.name,
      ctx.kmeans.k, ctx.kmeans.iterations, ctx.kmeans.inertia);
  return ctx;
}

ClusterContext ensure_clusters(const ExperimentConfig& config,
                               const DatasetConfig& ds,
                               const std::vector<MissRecord>& misses,
                               std::ostream& log) {
  const std::string dir = paths_for(config).cluster_dir(ds.name);
  if (stamp_matches(dir + "/clusters.json", config_hash(config))) {
    const auto j = nlohmann::json::parse(read_text(dir + "/clusters.json"));
    BundleManifest m;
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    return load_cluster_context(dir, m);
  }
  return build_clusters(config, ds, misses, log);
}

Modality modality_of(const std::string& model) {
  if (model == "embedding_pc_only") return Modality::kPcOnly;
  if (model == "embedding_delta_only") return Modality::kDeltaOnly;
  return Modality::kBoth;
}

void write_loss_curve(const std::string& path, const std::vector<double>& losses) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out += fmt::format("{},{}\n", i + 1, losses[i]);
  }
  write_text(path, out);
}

TrainConfig train_config(const ExperimentConfig& config, bool cluster) {
  TrainConfig t;
  t.batch_size = config.train.batch_size;
  t.seq_len = config.train.seq_len;
  t.clip_norm = config.train.clip_norm;
  if (cluster) {
    t.steps = config.models.cluster.steps;
    t.optimizer = config.models.cluster.optimizer;
    t.lr = config.models.cluster.lr;
  } else {
    t.steps = config.models.embedding.steps;
    t.optimizer = config.models.embedding.optimizer;
    t.lr = config.models.embedding.lr;
  }
  return t;
}

template <typename T>
void train_model(const ExperimentConfig& config, const DatasetConfig& ds,
                 const std::string& name, const std::vector<MissRecord>& misses,
                 std::ostream& log) {
  const std::string dir = paths_for(config).model_dir(ds.name, name);
  make_dirs(dir);
  const std::string hash = config_hash(config);
  const auto train = train_part(config, misses);
  const std::uint64_t seed = derive_seed(config.seed, ds.name, name);
  if (name == "cluster") {
    const ClusterContext ctx = ensure_clusters(config, ds, misses, log);
    ClusterModelConfig mc;
    mc.clusters = ctx.kmeans.k;
    mc.class_counts = ctx.class_counts();
    mc.hidden = config.models.cluster.hidden;
    mc.layers = config.models.cluster.layers;
    mc.top_k = config.eval.k;
    ClusterLstm<T> model(mc, seed);
    const ClusterEvents ev = make_cluster_events(train, ctx);
    const TrainConfig tc = train_config(config, true);
    TrainingSession session(model, ev, tc);
    if (ev.size() > 0) session.run(tc.steps);
    const std::vector<double>& losses = session.losses();
    save_cluster_bundle(dir, name, model, ctx, hash, losses.size(),
                        [&](Checkpoint& c) {
                          save_optimizer(c, session.optimizer(),
                                         model.param_refs());
                        });
    write_loss_curve(dir + "/loss.csv", losses);
    say(log, "[{}] train {}: {} steps, final loss {}", ds.name, name,
        losses.size(), losses.empty() ? 0.0 : losses.back());
    return;
  }
  const VocabArtifacts v = ensure_vocab(config, ds, misses, log);
  EmbeddingModelConfig mc;
  mc.pc_table_size = v.pcs.table_size();
  mc.delta_table_size = v.deltas.input_table_size();
  mc.output_classes = v.deltas.num_output_classes();
  mc.embedding_dim = config.models.embedding.embedding_dim;
  mc.hidden = config.models.embedding.hidden;
  mc.layers = config.models.embedding.layers;
  mc.top_k = config.eval.k;
  mc.modality = modality_of(name);
  EmbeddingLstm<T> model(mc, seed);
  const EmbeddingEvents ev = make_embedding_events(train, v.pcs, v.deltas);
  const TrainConfig tc = train_config(config, false);
  TrainingSession session(model, ev, tc);
  if (ev.size() > 0) session.run(tc.steps);
  const std::vector<double>& losses = session.losses();
  save_embedding_bundle(dir, name, model, v.pcs, v.deltas, hash, losses.size(),
                        [&](Checkpoint& c) {
                          save_optimizer(c, session.optimizer(),
                                         model.param_refs());
                        });
  write_loss_curve(dir + "/loss.csv", losses);
  say(log, "[{}] train {}: {} steps, final loss {}", ds.name, name,
      losses.size(), losses.empty() ? 0.0 : losses.back());
}

template <typename T>
std::vector<PredictionSet> infer_model(const ExperimentConfig& config,
                                       const DatasetConfig& ds,
                                       const std::string& name,
                                       std::span<const MissRecord> test) {
  const std::string dir = paths_for(config).model_dir(ds.name, name);
  if (!fs::exists(dir + "/manifest.json")) {
    throw DataError(fmt::format(
        "no trained '{}' bundle for dataset '{}'; run train first", name,
        ds.name));
  }
  const std::string hash = config_hash(config);
  if (name == "cluster") {
    const auto b = load_cluster_bundle<T>(dir, hash);
    return run_inference(b.model, b.ctx, test);
  }
  const auto b = load_embedding_bundle<T>(dir, hash);
  return run_inference(b.model, b.pcs, b.deltas, test);
}

template <typename F>
void with_scalar(const ExperimentConfig& config, F&& fn) {
  if (config.train.float64) {
    fn(double{});
  } else {
    fn(float{});
  }
}

}  // namespace

void cmd_simulate(const ExperimentConfig& config, std::ostream& log) {
  for_each_dataset(config, [&](const DatasetConfig& ds) {
    simulate_dataset(config, ds, log);
  });
}

void cmd_vocab(const ExperimentConfig& config, std::ostream& log) {
  for_each_dataset(config, [&](const DatasetConfig& ds) {
    build_vocab(config, ds, ensure_misses(config, ds, log), log);
  });
}

void cmd_cluster(const ExperimentConfig& config, std::ostream& log) {
  for_each_dataset(config, [&](const DatasetConfig& ds) {
    build_clusters(config, ds, ensure_misses(config, ds, log), log);
  });
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
  for_each_dataset(config, [&](const DatasetConfig& ds) {
    const auto misses = ensure_misses(config, ds, log);
    for (const auto& name : config.models.selected) {
      with_scalar(config, [&](auto tag) {
        train_model<decltype(tag)>(config, ds, name, misses, log);
      });
    }
  });
}

EvalReport cmd_eval(const ExperimentConfig& config, std::ostream& log) {
  std::vector<std::vector<EvalRow>> per_dataset(config.datasets.size());
  for_each_dataset(config, [&](const DatasetConfig& ds) {
    const std::size_t index = static_cast<std::size_t>(&ds - config.datasets.data());
    const auto misses = ensure_misses(config, ds, log);
    const auto test = test_part(config, misses);
    auto& rows = per_dataset[index];
    for (const auto& name : config.models.selected) {
      with_scalar(config, [&](auto tag) {
        const auto preds = infer_model<decltype(tag)>(config, ds, name, test);
        rows.push_back(score(ds.name, name, preds));
      });
    }
    if (config.baselines.enabled) {
      StreamPrefetcher stream(config.baselines.stream);
      rows.push_back(score(ds.name, "stream", run_baseline(stream, test)));
      GhbPrefetcher ghb(config.baselines.ghb);
      rows.push_back(score(ds.name, "ghb", run_baseline(ghb, test)));
    }
    for (const auto& r : rows) {
      say(log, "[{}] eval {}: precision@{} {} recall@{} {}", ds.name, r.model,
          config.eval.k, r.precision, config.eval.k, r.recall);
    }
  });
  EvalReport report;
  report.config_hash = config_hash(config);
  report.k = config.eval.k;
  for (auto& rows : per_dataset) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  const Paths paths = paths_for(config);
  make_dirs(paths.root);
  emit_report(report, ReportFormat::kCsv, paths.report(ReportFormat::kCsv));
  emit_report(report, ReportFormat::kJson, paths.report(ReportFormat::kJson));
  return report;
}

void cmd_report(const ExperimentConfig& config, std::ostream& out) {
  const Paths paths = paths_for(config);
  const EvalReport report =
      parse_report_json(read_text(paths.report(ReportFormat::kJson)));
  if (report.config_hash != config_hash(config)) {
    throw ConfigError(fmt::format(
        "report was produced by config {} but the current config is {}",
        report.config_hash, config_hash(config)));
  }
  out << fmt::format("{:<24} {:<22} {:>12} {:>12}\n", "dataset", "model",
                     fmt::format("precision@{}", report.k),
                     fmt::format("recall@{}", report.k));
  for (const auto& r : report.rows) {
    out << fmt::format("{:<24} {:<22} {:>12.4f} {:>12.4f}\n", r.dataset,
                       r.model, r.precision, r.recall);
  }
  if (report.rows.empty()) return;
  std::string csv = "model,geomean_precision,geomean_recall\n";
  for (const auto& g : report.geomeans()) {
    out << fmt::format("{:<24} {:<22} {:>12.4f} {:>12.4f}\n", "geomean",
                       g.model, g.precision, g.recall);
    csv += fmt::format("{},{},{}\n", g.model, g.precision, g.recall);
  }
  write_text(paths.root + "/geomean.csv", csv);
}

void cmd_export_embeddings(const ExperimentConfig& config, std::ostream& log) {
  for_each_dataset(config, [&](const DatasetConfig& ds) {
    const auto misses = ensure_misses(config, ds, log);
    const auto train = train_part(config, misses);
    for (const auto& name : config.models.selected) {
      if (name == "cluster") continue;
      with_scalar(config, [&](auto tag) {
        using T = decltype(tag);
        const std::string dir = paths_for(config).model_dir(ds.name, name);
        const auto b = load_embedding_bundle<T>(dir, config_hash(config));
        const auto ev = make_embedding_events(train, b.pcs, b.deltas);
        std::set<std::pair<ClassId, ClassId>> pairs;
        for (std::size_t i = 0; i < ev.size(); ++i) {
          pairs.emplace(ev.pc[i], ev.delta_in[i]);
        }
        const auto width = 2 * b.model.config().embedding_dim;
        std::string out = "pc,delta";
        for (nn::Index j = 0; j < width; ++j) out += fmt::format(",e{}", j);
        out += "\n";
        for (const auto& [pc, d] : pairs) {
          const auto x = b.model.embed(std::span(&pc, 1), std::span(&d, 1));
          const std::string pc_label =
              pc == b.pcs.oov() ? "oov" : fmt::format("{:#x}", b.pcs.decode(pc));
          const std::string d_label = d == b.deltas.oov_input()
                                          ? "oov"
                                          : std::to_string(b.deltas.decode(d));
          out += pc_label + "," + d_label;
          for (nn::Index j = 0; j < width; ++j) {
            out += fmt::format(",{}", x(j, 0));
          }
          out += "\n";
        }
        const std::string path = dir + "/embeddings.csv";
        write_text(path, out);
        say(log, "[{}] export {}: {} (pc, delta) pairs -> {}", ds.name, name,
            pairs.size(), path);
      });
    }
  });
}

}  // namespace pfbench
