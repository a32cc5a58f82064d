#include "pfbench/bundle.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace pfbench {

void finalize_bundle(const std::string& dir, BundleManifest m) {
  m.hashes.clear();
  for (const auto& [role, file] : m.files) {
    m.hashes[file] = hex64(hash_file(dir + "/" + file));
  }
  nlohmann::json j = {{"model_name", m.model_name},
                      {"kind", m.kind},
                      {"config_hash", m.config_hash},
                      {"dtype", m.dtype},
                      {"train_steps", m.train_steps},
                      {"files", m.files},
                      {"hashes", m.hashes}};
  const std::string path = dir + "/manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path));
  out << j.dump(2) << "\n";
  if (!out) throw IoError(fmt::format("write to {} failed", path));
}

BundleManifest open_bundle(const std::string& dir,
                           const std::optional<std::string>& expected_hash) {
  const std::string path = dir + "/manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  BundleManifest m;
  try {
    const auto j = nlohmann::json::parse(ss.str());
    m.model_name = j.at("model_name").get<std::string>();
    m.kind = j.at("kind").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.dtype = j.at("dtype").get<std::string>();
    m.train_steps = j.at("train_steps").get<std::uint64_t>();
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    m.hashes = j.at("hashes").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed manifest {}: {}", path, e.what()));
  }
  if (expected_hash && *expected_hash != m.config_hash) {
    throw ConfigError(fmt::format(
        "bundle {} was produced by config {} but the current config is {}",
        dir, m.config_hash, *expected_hash));
  }
  for (const auto& [role, file] : m.files) {
    const auto it = m.hashes.find(file);
    if (it == m.hashes.end()) {
      throw FormatError(fmt::format("manifest lacks a hash for {}", file));
    }
    const std::string actual = hex64(hash_file(dir + "/" + file));
    if (actual != it->second) {
      throw FormatError(fmt::format("{}/{} hash {} does not match manifest {}",
                                    dir, file, actual, it->second));
    }
  }
  return m;
}

std::string bundle_file(const std::string& dir, const BundleManifest& m,
                        const std::string& role) {
  const auto it = m.files.find(role);
  if (it == m.files.end()) {
    throw FormatError(fmt::format("bundle {} has no '{}' file", dir, role));
  }
  return dir + "/" + it->second;
}

void save_cluster_context(const std::string& dir, const ClusterContext& ctx,
                          BundleManifest& m) {
  save_clusters(dir + "/clusters.txt", ctx.kmeans, ctx.norms);
  m.files["clusters"] = "clusters.txt";
  for (std::size_t c = 0; c < ctx.vocabs.size(); ++c) {
    if (ctx.vocabs[c].num_output_classes() == 0) continue;
    const std::string file = fmt::format("cluster_vocab_{}.txt", c);
    ctx.vocabs[c].save(dir + "/" + file);
    m.files[fmt::format("cluster_vocab_{}", c)] = file;
  }
}

ClusterContext load_cluster_context(const std::string& dir,
                                    const BundleManifest& m) {
  ClusterContext ctx;
  load_clusters(bundle_file(dir, m, "clusters"), ctx.kmeans, ctx.norms);
  ctx.vocabs.resize(ctx.kmeans.k);
  for (std::size_t c = 0; c < ctx.kmeans.k; ++c) {
    const std::string role = fmt::format("cluster_vocab_{}", c);
    if (m.files.count(role)) {
      ctx.vocabs[c] = DeltaVocab::load(bundle_file(dir, m, role));
    }
  }
  return ctx;
}

}  // namespace pfbench
