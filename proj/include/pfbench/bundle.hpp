#pragma once

// Model bundle: a directory holding checkpoint.bin (weights and, via
// `extra`, optimizer state), the vocabulary or
// clustering files the model needs, and manifest.json recording the model
// kind, the producing config hash and the FNV-1a hash of every file.

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "pfbench/checkpoint.hpp"
#include "pfbench/models.hpp"

namespace pfbench {

struct BundleManifest {
  std::string model_name;  // e.g. "embedding_pc_only"
  std::string kind;        // "embedding" or "cluster"
  std::string config_hash;
  std::string dtype;       // "f32" or "f64"
  std::uint64_t train_steps = 0;
  std::map<std::string, std::string> files;  // role -> file name
  std::map<std::string, std::string> hashes; // file name -> hex hash
};

// Hashes every file listed in `m.files` and writes manifest.json.
void finalize_bundle(const std::string& dir, BundleManifest m);

// Reads the manifest and verifies every file hash. When `expected_hash` is
// given, a different config hash is rejected with ConfigError.
BundleManifest open_bundle(const std::string& dir,
                           const std::optional<std::string>& expected_hash);

std::string bundle_file(const std::string& dir, const BundleManifest& m,
                        const std::string& role);

void save_cluster_context(const std::string& dir, const ClusterContext& ctx,
                          BundleManifest& m);
ClusterContext load_cluster_context(const std::string& dir,
                                    const BundleManifest& m);

template <typename T>
void save_embedding_bundle(const std::string& dir, const std::string& name,
                           const EmbeddingLstm<T>& model, const PcVocab& pcs,
                           const DeltaVocab& deltas,
                           const std::string& config_hash,
                           std::uint64_t steps,
                           const std::function<void(Checkpoint&)>& extra = {}) {
  BundleManifest m{name, "embedding", config_hash,
                   sizeof(T) == 8 ? "f64" : "f32", steps, {}, {}};
  Checkpoint ckpt;
  model.to_checkpoint(ckpt);
  ckpt.meta["config_hash"] = config_hash;
  if (extra) extra(ckpt);
  ckpt.save(dir + "/checkpoint.bin");
  pcs.save(dir + "/pc_vocab.txt");
  deltas.save(dir + "/delta_vocab.txt");
  m.files = {{"checkpoint", "checkpoint.bin"},
             {"pc_vocab", "pc_vocab.txt"},
             {"delta_vocab", "delta_vocab.txt"}};
  finalize_bundle(dir, std::move(m));
}

template <typename T>
struct EmbeddingBundle {
  BundleManifest manifest;
  EmbeddingLstm<T> model;
  PcVocab pcs;
  DeltaVocab deltas;
};

template <typename T>
EmbeddingBundle<T> load_embedding_bundle(
    const std::string& dir, const std::optional<std::string>& expected_hash) {
  EmbeddingBundle<T> b;
  b.manifest = open_bundle(dir, expected_hash);
  if (b.manifest.kind != "embedding") {
    throw FormatError(dir + " does not hold an embedding model");
  }
  b.model = EmbeddingLstm<T>::from_checkpoint(
      Checkpoint::load(bundle_file(dir, b.manifest, "checkpoint")));
  b.pcs = PcVocab::load(bundle_file(dir, b.manifest, "pc_vocab"));
  b.deltas = DeltaVocab::load(bundle_file(dir, b.manifest, "delta_vocab"));
  return b;
}

template <typename T>
void save_cluster_bundle(const std::string& dir, const std::string& name,
                         const ClusterLstm<T>& model, const ClusterContext& ctx,
                         const std::string& config_hash, std::uint64_t steps,
                         const std::function<void(Checkpoint&)>& extra = {}) {
  BundleManifest m{name, "cluster", config_hash,
                   sizeof(T) == 8 ? "f64" : "f32", steps, {}, {}};
  Checkpoint ckpt;
  model.to_checkpoint(ckpt);
  ckpt.meta["config_hash"] = config_hash;
  if (extra) extra(ckpt);
  ckpt.save(dir + "/checkpoint.bin");
  m.files["checkpoint"] = "checkpoint.bin";
  save_cluster_context(dir, ctx, m);
  finalize_bundle(dir, std::move(m));
}

template <typename T>
struct ClusterBundle {
  BundleManifest manifest;
  ClusterLstm<T> model;
  ClusterContext ctx;
};

template <typename T>
ClusterBundle<T> load_cluster_bundle(
    const std::string& dir, const std::optional<std::string>& expected_hash) {
  ClusterBundle<T> b;
  b.manifest = open_bundle(dir, expected_hash);
  if (b.manifest.kind != "cluster") {
    throw FormatError(dir + " does not hold a cluster model");
  }
  b.model = ClusterLstm<T>::from_checkpoint(
      Checkpoint::load(bundle_file(dir, b.manifest, "checkpoint")));
  b.ctx = load_cluster_context(dir, b.manifest);
  return b;
}

}  // namespace pfbench
