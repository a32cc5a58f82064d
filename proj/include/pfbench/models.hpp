#pragma once

// Embedding LSTM and clustering LSTM prefetch models, their event encoding,
// and the truncated-BPTT training session shared by both.
//
// At miss N a model consumes (PC_N, delta_{N-1}) and is scored against
// delta_N = line_{N+1} - line_N, so L misses yield L-1 labelled events. The
// first event of a stream (or of a cluster's sub-stream) has no previous
// delta and uses the OOV input (embedding model) or 0 (clustering model).

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pfbench/batching.hpp"
#include "pfbench/checkpoint.hpp"
#include "pfbench/clustering.hpp"
#include "pfbench/error.hpp"
#include "pfbench/lstm.hpp"
#include "pfbench/optim.hpp"
#include "pfbench/prediction.hpp"
#include "pfbench/random.hpp"
#include "pfbench/vocab.hpp"

namespace pfbench {

enum class Modality { kBoth, kPcOnly, kDeltaOnly };

Modality parse_modality(const std::string& s);
std::string to_string(Modality m);

// ---------------------------------------------------------------------------
// Event encoding

struct EmbeddingEvents {
  std::vector<ClassId> pc;
  std::vector<ClassId> delta_in;
  std::vector<ClassId> label;  // DeltaVocab::kOovOutput when unpredictable
  std::vector<std::uint8_t> segment_start;

  std::size_t size() const { return pc.size(); }
};

EmbeddingEvents make_embedding_events(std::span<const MissRecord> misses,
                                      const PcVocab& pcs,
                                      const DeltaVocab& deltas);

struct ClusterEvents {
  std::vector<std::int32_t> cluster;
  std::vector<double> input;   // normalized previous in-cluster delta
  std::vector<ClassId> label;  // class in the cluster's own vocabulary
  std::vector<std::uint8_t> segment_start;

  std::size_t size() const { return cluster.size(); }
};

// Everything the clustering model needs besides its weights.
struct ClusterContext {
  ClusterModel kmeans;
  std::vector<NormParams> norms;
  std::vector<DeltaVocab> vocabs;  // per cluster, output side used

  std::size_t max_classes() const;
  std::vector<std::size_t> class_counts() const;
};

// Fits normalization and per-cluster vocabularies on `train` misses.
ClusterContext build_cluster_context(std::span<const MissRecord> train,
                                     ClusterModel kmeans,
                                     std::size_t max_output_per_cluster);

// Events are grouped by cluster (ascending ID); each group is one segment
// in miss order.
ClusterEvents make_cluster_events(std::span<const MissRecord> misses,
                                  const ClusterContext& ctx);

// ---------------------------------------------------------------------------
// Shared softmax output head

namespace detail {

// Mean cross-entropy over labelled (label >= 0) positions of a window.
// `limits`, when given, restricts the softmax of column (t, b) to its first
// limits[t][b] classes. Adds parameter gradients into g_w / g_b and writes
// the gradient w.r.t. each top-layer output into d_tops.
template <typename T>
T softmax_head(const nn::Matrix<T>& out_w, const nn::Matrix<T>& out_b,
               const std::vector<nn::Matrix<T>>& tops,
               const std::vector<std::vector<ClassId>>& labels,
               const std::vector<std::vector<nn::Index>>* limits,
               nn::Matrix<T>* g_w, nn::Matrix<T>* g_b,
               std::vector<nn::Matrix<T>>* d_tops) {
  using nn::Index;
  const std::size_t steps = tops.size();
  if (steps == 0) return T(0);
  const Index hidden = tops[0].rows();
  const Index lanes = tops[0].cols();
  const Index classes = out_w.rows();
  nn::Matrix<T> h_all(hidden, static_cast<Index>(steps) * lanes);
  for (std::size_t t = 0; t < steps; ++t) {
    h_all.middleCols(static_cast<Index>(t) * lanes, lanes) = tops[t];
  }
  nn::Matrix<T> logits = out_w * h_all;
  logits.colwise() += out_b.col(0);

  std::size_t count = 0;
  for (const auto& row : labels) {
    for (ClassId l : row) count += l >= 0;
  }
  double loss = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    for (Index b = 0; b < lanes; ++b) {
      const Index j = static_cast<Index>(t) * lanes + b;
      const ClassId label = labels[t][b];
      const Index n = limits ? (*limits)[t][b] : classes;
      auto col = logits.col(j);
      if (label < 0 || n == 0) {
        col.setZero();
        continue;
      }
      if (label >= n) {
        throw DataError(fmt::format("label {} outside {} classes", label, n));
      }
      auto head = col.head(n).array();
      const T max = head.maxCoeff();
      head = (head - max).exp();
      const T sum = head.sum();
      head /= sum;
      loss -= std::log(static_cast<double>(std::max(head(label), T(1e-30))));
      head(label) -= T(1);
      head /= static_cast<T>(count);
      col.tail(classes - n).setZero();
    }
  }
  if (g_w) g_w->noalias() += logits * h_all.transpose();
  if (g_b) g_b->col(0) += logits.rowwise().sum();
  if (d_tops) {
    nn::Matrix<T> dh = out_w.transpose() * logits;
    d_tops->resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      (*d_tops)[t] = dh.middleCols(static_cast<Index>(t) * lanes, lanes);
    }
  }
  return count ? static_cast<T>(loss / static_cast<double>(count)) : T(0);
}

template <typename T>
nn::Matrix<T> uniform_matrix(nn::Index rows, nn::Index cols, double s,
                             Rng& rng) {
  nn::Matrix<T> m(rows, cols);
  for (nn::Index j = 0; j < cols; ++j) {
    for (nn::Index i = 0; i < rows; ++i) {
      m(i, j) = static_cast<T>(rng.uniform_real(-s, s));
    }
  }
  return m;
}

template <typename T>
std::vector<nn::LstmLayerParams<T>> zeros_like(
    const std::vector<nn::LstmLayerParams<T>>& layers) {
  std::vector<nn::LstmLayerParams<T>> out;
  for (const auto& l : layers) {
    out.push_back(nn::LstmLayerParams<T>::zeros(l.input_size(),
                                                 l.hidden_size()));
  }
  return out;
}

template <typename T>
void put_layers(Checkpoint& ckpt, const std::vector<nn::LstmLayerParams<T>>& ls) {
  for (std::size_t l = 0; l < ls.size(); ++l) {
    ckpt.put(fmt::format("lstm/{}/weights", l), ls[l].weights);
    ckpt.put(fmt::format("lstm/{}/bias", l), ls[l].bias);
  }
}

template <typename T>
void get_layers(const Checkpoint& ckpt,
                std::vector<nn::LstmLayerParams<T>>& ls) {
  for (std::size_t l = 0; l < ls.size(); ++l) {
    auto w = ckpt.matrix<T>(fmt::format("lstm/{}/weights", l));
    auto b = ckpt.matrix<T>(fmt::format("lstm/{}/bias", l));
    if (w.rows() != ls[l].weights.rows() || w.cols() != ls[l].weights.cols() ||
        b.rows() != ls[l].bias.rows() || b.cols() != 1) {
      throw ShapeError(fmt::format("checkpoint layer {} has wrong shape", l));
    }
    ls[l].weights = std::move(w);
    ls[l].bias = std::move(b);
  }
}

template <typename T>
nn::Matrix<T> checked_matrix(const Checkpoint& ckpt, const std::string& name,
                             nn::Index rows, nn::Index cols) {
  auto m = ckpt.matrix<T>(name);
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(fmt::format("checkpoint tensor {} is {}x{}, expected {}x{}",
                                 name, m.rows(), m.cols(), rows, cols));
  }
  return m;
}

std::uint64_t meta_u64(const Checkpoint& ckpt, const std::string& key);

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding LSTM

struct EmbeddingModelConfig {
  std::size_t pc_table_size = 1;     // PC classes + OOV
  std::size_t delta_table_size = 1;  // input delta classes + OOV
  std::size_t output_classes = 1;
  nn::Index embedding_dim = 128;
  nn::Index hidden = 128;
  std::size_t layers = 2;
  std::size_t top_k = 10;
  Modality modality = Modality::kBoth;
};

// PC and delta embeddings (E each) are concatenated into a 2E input. A
// single-modality model uses one 2E-wide table so the LSTM input width is
// the same for all modalities. Tables are (width x entries).
template <typename T>
class EmbeddingLstm {
 public:
  struct Params {
    nn::Matrix<T> pc_table;
    nn::Matrix<T> delta_table;
    std::vector<nn::LstmLayerParams<T>> layers;
    nn::Matrix<T> out_w;
    nn::Matrix<T> out_b;
  };

  EmbeddingLstm() = default;
  EmbeddingLstm(const EmbeddingModelConfig& cfg, std::uint64_t seed)
      : cfg_(cfg) {
    if (cfg.embedding_dim < 1 || cfg.hidden < 1 || cfg.layers < 1 ||
        cfg.output_classes < 1 || cfg.pc_table_size < 1 ||
        cfg.delta_table_size < 1) {
      throw ConfigError("embedding model dimensions must be positive");
    }
    Rng rng(seed);
    const nn::Index e = cfg.embedding_dim;
    const double se = 1.0 / std::sqrt(static_cast<double>(e));
    const auto pc_rows = cfg.modality == Modality::kBoth     ? e
                         : cfg.modality == Modality::kPcOnly ? 2 * e
                                                             : 0;
    const auto delta_rows = cfg.modality == Modality::kBoth ? e
                            : cfg.modality == Modality::kDeltaOnly ? 2 * e
                                                                   : 0;
    p_.pc_table = detail::uniform_matrix<T>(
        pc_rows, pc_rows ? static_cast<nn::Index>(cfg.pc_table_size) : 0, se,
        rng);
    p_.delta_table = detail::uniform_matrix<T>(
        delta_rows,
        delta_rows ? static_cast<nn::Index>(cfg.delta_table_size) : 0, se,
        rng);
    nn::LstmStack<T> stack(2 * e, cfg.hidden, cfg.layers, rng);
    p_.layers = std::move(stack.layers);
    const double sh = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    p_.out_w = detail::uniform_matrix<T>(
        static_cast<nn::Index>(cfg.output_classes), cfg.hidden, sh, rng);
    p_.out_b = nn::Matrix<T>::Zero(static_cast<nn::Index>(cfg.output_classes), 1);
    reset_grads();
  }

  const EmbeddingModelConfig& config() const { return cfg_; }
  Params& params() { return p_; }
  const Params& params() const { return p_; }
  Params& grads() { return g_; }

  std::vector<nn::LstmState<T>> zero_states(nn::Index batch) const {
    return stack_view().zero_states(batch);
  }

  std::vector<nn::ParamRef<T>> param_refs() {
    std::vector<nn::ParamRef<T>> refs;
    if (p_.pc_table.size()) {
      refs.push_back({"embed/pc", &p_.pc_table, &g_.pc_table, &touched_pc_});
    }
    if (p_.delta_table.size()) {
      refs.push_back(
          {"embed/delta", &p_.delta_table, &g_.delta_table, &touched_delta_});
    }
    for (std::size_t l = 0; l < p_.layers.size(); ++l) {
      refs.push_back({fmt::format("lstm/{}/weights", l), &p_.layers[l].weights,
                      &g_.layers[l].weights, nullptr});
      refs.push_back({fmt::format("lstm/{}/bias", l), &p_.layers[l].bias,
                      &g_.layers[l].bias, nullptr});
    }
    refs.push_back({"out/weights", &p_.out_w, &g_.out_w, nullptr});
    refs.push_back({"out/bias", &p_.out_b, &g_.out_b, nullptr});
    return refs;
  }

  // Input columns for a set of lanes.
  nn::Matrix<T> embed(std::span<const ClassId> pcs,
                      std::span<const ClassId> deltas) const {
    const nn::Index e = cfg_.embedding_dim;
    nn::Matrix<T> x(2 * e, static_cast<nn::Index>(pcs.size()));
    for (std::size_t b = 0; b < pcs.size(); ++b) {
      const auto j = static_cast<nn::Index>(b);
      check_id(pcs[b], cfg_.pc_table_size, "PC");
      check_id(deltas[b], cfg_.delta_table_size, "delta");
      switch (cfg_.modality) {
        case Modality::kBoth:
          x.col(j).head(e) = p_.pc_table.col(pcs[b]);
          x.col(j).tail(e) = p_.delta_table.col(deltas[b]);
          break;
        case Modality::kPcOnly:
          x.col(j) = p_.pc_table.col(pcs[b]);
          break;
        case Modality::kDeltaOnly:
          x.col(j) = p_.delta_table.col(deltas[b]);
          break;
      }
    }
    return x;
  }

  // Forward + backward over one window; gradients replace grads(). Returns
  // the mean cross-entropy over labelled events.
  T loss_and_gradients(const WindowBatch& batch, const EmbeddingEvents& ev,
                       std::vector<nn::LstmState<T>>& states) {
    return run_window(batch, ev, states, true);
  }

  T loss(const WindowBatch& batch, const EmbeddingEvents& ev,
         std::vector<nn::LstmState<T>>& states) {
    return run_window(batch, ev, states, false);
  }

  // One inference step for a single stream; returns output probabilities.
  nn::Vector<T> step(ClassId pc, ClassId delta,
                     std::vector<nn::LstmState<T>>& states) const {
    const nn::Matrix<T> x = embed(std::span(&pc, 1), std::span(&delta, 1));
    const auto stack = stack_view();
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      states[l] = nn::lstm_step(l == 0 ? x : states[l - 1].h, states[l],
                                stack.layers[l]);
    }
    nn::Vector<T> logits = p_.out_w * states.back().h.col(0) + p_.out_b.col(0);
    return nn::softmax<T>(logits);
  }

  void to_checkpoint(Checkpoint& ckpt) const {
    ckpt.meta["model"] = "embedding";
    ckpt.meta["modality"] = to_string(cfg_.modality);
    ckpt.meta["pc_table_size"] = std::to_string(cfg_.pc_table_size);
    ckpt.meta["delta_table_size"] = std::to_string(cfg_.delta_table_size);
    ckpt.meta["output_classes"] = std::to_string(cfg_.output_classes);
    ckpt.meta["embedding_dim"] = std::to_string(cfg_.embedding_dim);
    ckpt.meta["hidden"] = std::to_string(cfg_.hidden);
    ckpt.meta["layers"] = std::to_string(cfg_.layers);
    ckpt.meta["top_k"] = std::to_string(cfg_.top_k);
    ckpt.put("embed/pc", p_.pc_table);
    ckpt.put("embed/delta", p_.delta_table);
    detail::put_layers(ckpt, p_.layers);
    ckpt.put("out/weights", p_.out_w);
    ckpt.put("out/bias", p_.out_b);
  }

  static EmbeddingLstm from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.meta.count("model") || ckpt.meta.at("model") != "embedding") {
      throw FormatError("checkpoint does not hold an embedding model");
    }
    EmbeddingModelConfig cfg;
    cfg.modality = parse_modality(ckpt.meta.at("modality"));
    cfg.pc_table_size = detail::meta_u64(ckpt, "pc_table_size");
    cfg.delta_table_size = detail::meta_u64(ckpt, "delta_table_size");
    cfg.output_classes = detail::meta_u64(ckpt, "output_classes");
    cfg.embedding_dim = static_cast<nn::Index>(detail::meta_u64(ckpt, "embedding_dim"));
    cfg.hidden = static_cast<nn::Index>(detail::meta_u64(ckpt, "hidden"));
    cfg.layers = detail::meta_u64(ckpt, "layers");
    cfg.top_k = detail::meta_u64(ckpt, "top_k");
    EmbeddingLstm m(cfg, 0);
    m.p_.pc_table = detail::checked_matrix<T>(ckpt, "embed/pc", m.p_.pc_table.rows(),
                                              m.p_.pc_table.cols());
    m.p_.delta_table = detail::checked_matrix<T>(
        ckpt, "embed/delta", m.p_.delta_table.rows(), m.p_.delta_table.cols());
    detail::get_layers(ckpt, m.p_.layers);
    m.p_.out_w = detail::checked_matrix<T>(ckpt, "out/weights", m.p_.out_w.rows(),
                                           m.p_.out_w.cols());
    m.p_.out_b = detail::checked_matrix<T>(ckpt, "out/bias", m.p_.out_b.rows(), 1);
    return m;
  }

 private:
  static void check_id(ClassId id, std::size_t size, const char* what) {
    if (id < 0 || static_cast<std::size_t>(id) >= size) {
      throw DataError(fmt::format("{} class {} outside table of {}", what, id,
                                  size));
    }
  }

  // Non-owning stack over the parameter layers.
  struct StackView {
    const std::vector<nn::LstmLayerParams<T>>& layers;
    std::vector<nn::LstmState<T>> zero_states(nn::Index batch) const {
      std::vector<nn::LstmState<T>> s;
      for (const auto& l : layers) {
        s.push_back(nn::LstmState<T>::zeros(l.hidden_size(), batch));
      }
      return s;
    }
  };
  StackView stack_view() const { return {p_.layers}; }

  void reset_grads() {
    g_.pc_table = nn::Matrix<T>::Zero(p_.pc_table.rows(), p_.pc_table.cols());
    g_.delta_table =
        nn::Matrix<T>::Zero(p_.delta_table.rows(), p_.delta_table.cols());
    g_.layers = detail::zeros_like(p_.layers);
    g_.out_w = nn::Matrix<T>::Zero(p_.out_w.rows(), p_.out_w.cols());
    g_.out_b = nn::Matrix<T>::Zero(p_.out_b.rows(), 1);
  }

  void clear_grads() {
    for (nn::Index c : touched_pc_) g_.pc_table.col(c).setZero();
    for (nn::Index c : touched_delta_) g_.delta_table.col(c).setZero();
    for (auto& l : g_.layers) {
      l.weights.setZero();
      l.bias.setZero();
    }
    g_.out_w.setZero();
    g_.out_b.setZero();
  }

  T run_window(const WindowBatch& batch, const EmbeddingEvents& ev,
               std::vector<nn::LstmState<T>>& states, bool backward) {
    const std::size_t steps = batch.steps();
    const std::size_t lanes = batch.lanes();
    std::vector<nn::Matrix<T>> xs(steps);
    std::vector<std::vector<ClassId>> labels(steps, std::vector<ClassId>(lanes));
    std::vector<ClassId> pcs(lanes), deltas(lanes);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t b = 0; b < lanes; ++b) {
        const std::size_t i = batch.index[t][b];
        pcs[b] = ev.pc[i];
        deltas[b] = ev.delta_in[i];
        labels[t][b] = ev.label[i];
      }
      xs[t] = embed(pcs, deltas);
    }
    nn::LstmStack<T> stack;
    stack.layers = p_.layers;  // copy keeps forward() const-correct
    typename nn::LstmStack<T>::SequenceCache cache;
    auto tops = stack.forward(std::span<const nn::Matrix<T>>(xs), states,
                              &batch.reset, backward ? &cache : nullptr);
    if (!backward) {
      return detail::softmax_head<T>(p_.out_w, p_.out_b, tops, labels, nullptr,
                                     nullptr, nullptr, nullptr);
    }
    clear_grads();
    std::vector<nn::Matrix<T>> d_tops;
    const T loss = detail::softmax_head<T>(p_.out_w, p_.out_b, tops, labels,
                                           nullptr, &g_.out_w, &g_.out_b,
                                           &d_tops);
    std::vector<nn::Matrix<T>> d_xs;
    stack.backward(cache, std::span<const nn::Matrix<T>>(d_tops), &batch.reset,
                   g_.layers, &d_xs);
    scatter_embedding_grads(batch, ev, d_xs);
    return loss;
  }

  void scatter_embedding_grads(const WindowBatch& batch,
                               const EmbeddingEvents& ev,
                               const std::vector<nn::Matrix<T>>& d_xs) {
    const nn::Index e = cfg_.embedding_dim;
    touched_pc_.clear();
    touched_delta_.clear();
    for (std::size_t t = 0; t < batch.steps(); ++t) {
      for (std::size_t b = 0; b < batch.lanes(); ++b) {
        const std::size_t i = batch.index[t][b];
        const auto dx = d_xs[t].col(static_cast<nn::Index>(b));
        switch (cfg_.modality) {
          case Modality::kBoth:
            g_.pc_table.col(ev.pc[i]) += dx.head(e);
            g_.delta_table.col(ev.delta_in[i]) += dx.tail(e);
            touched_pc_.push_back(ev.pc[i]);
            touched_delta_.push_back(ev.delta_in[i]);
            break;
          case Modality::kPcOnly:
            g_.pc_table.col(ev.pc[i]) += dx;
            touched_pc_.push_back(ev.pc[i]);
            break;
          case Modality::kDeltaOnly:
            g_.delta_table.col(ev.delta_in[i]) += dx;
            touched_delta_.push_back(ev.delta_in[i]);
            break;
        }
      }
    }
    for (auto* v : {&touched_pc_, &touched_delta_}) {
      std::sort(v->begin(), v->end());
      v->erase(std::unique(v->begin(), v->end()), v->end());
    }
  }

  EmbeddingModelConfig cfg_;
  Params p_;
  Params g_;
  std::vector<nn::Index> touched_pc_;
  std::vector<nn::Index> touched_delta_;
};

// ---------------------------------------------------------------------------
// Clustering LSTM

struct ClusterModelConfig {
  std::size_t clusters = 12;
  // Per-cluster output vocabulary sizes; the shared output layer is as wide
  // as the largest and cluster c's softmax covers its first class_counts[c].
  std::vector<std::size_t> class_counts;
  nn::Index hidden = 128;
  std::size_t layers = 2;
  std::size_t top_k = 10;

  std::size_t output_width() const {
    std::size_t w = 1;
    for (auto n : class_counts) w = std::max(w, n);
    return w;
  }
};

// One LSTM shared by all clusters. Input is [normalized delta; one-hot
// cluster ID]; each cluster keeps its own recurrent state at inference.
template <typename T>
class ClusterLstm {
 public:
  struct Params {
    std::vector<nn::LstmLayerParams<T>> layers;
    nn::Matrix<T> out_w;
    nn::Matrix<T> out_b;
  };

  ClusterLstm() = default;
  ClusterLstm(const ClusterModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.clusters < 1 || cfg.hidden < 1 || cfg.layers < 1) {
      throw ConfigError("cluster model dimensions must be positive");
    }
    if (cfg.class_counts.size() != cfg.clusters) {
      throw ConfigError(fmt::format("{} class counts for {} clusters",
                                    cfg.class_counts.size(), cfg.clusters));
    }
    Rng rng(seed);
    nn::LstmStack<T> stack(input_width(), cfg.hidden, cfg.layers, rng);
    p_.layers = std::move(stack.layers);
    const auto v = static_cast<nn::Index>(cfg.output_width());
    p_.out_w = detail::uniform_matrix<T>(
        v, cfg.hidden, 1.0 / std::sqrt(static_cast<double>(cfg.hidden)), rng);
    p_.out_b = nn::Matrix<T>::Zero(v, 1);
    g_.layers = detail::zeros_like(p_.layers);
    g_.out_w = nn::Matrix<T>::Zero(v, cfg.hidden);
    g_.out_b = nn::Matrix<T>::Zero(v, 1);
  }

  const ClusterModelConfig& config() const { return cfg_; }
  nn::Index input_width() const {
    return 1 + static_cast<nn::Index>(cfg_.clusters);
  }
  Params& params() { return p_; }
  const Params& params() const { return p_; }
  Params& grads() { return g_; }

  std::vector<nn::LstmState<T>> zero_states(nn::Index batch) const {
    std::vector<nn::LstmState<T>> s;
    for (const auto& l : p_.layers) {
      s.push_back(nn::LstmState<T>::zeros(l.hidden_size(), batch));
    }
    return s;
  }

  std::vector<nn::ParamRef<T>> param_refs() {
    std::vector<nn::ParamRef<T>> refs;
    for (std::size_t l = 0; l < p_.layers.size(); ++l) {
      refs.push_back({fmt::format("lstm/{}/weights", l), &p_.layers[l].weights,
                      &g_.layers[l].weights, nullptr});
      refs.push_back({fmt::format("lstm/{}/bias", l), &p_.layers[l].bias,
                      &g_.layers[l].bias, nullptr});
    }
    refs.push_back({"out/weights", &p_.out_w, &g_.out_w, nullptr});
    refs.push_back({"out/bias", &p_.out_b, &g_.out_b, nullptr});
    return refs;
  }

  T loss_and_gradients(const WindowBatch& batch, const ClusterEvents& ev,
                       std::vector<nn::LstmState<T>>& states) {
    return run_window(batch, ev, states, true);
  }

  T loss(const WindowBatch& batch, const ClusterEvents& ev,
         std::vector<nn::LstmState<T>>& states) {
    return run_window(batch, ev, states, false);
  }

  // Probabilities over cluster c's classes (length class_counts[c]).
  nn::Vector<T> step(std::size_t cluster, double input,
                     std::vector<nn::LstmState<T>>& states) const {
    nn::Matrix<T> x = nn::Matrix<T>::Zero(input_width(), 1);
    fill_input(x, 0, cluster, input);
    for (std::size_t l = 0; l < p_.layers.size(); ++l) {
      states[l] = nn::lstm_step(l == 0 ? x : states[l - 1].h, states[l],
                                p_.layers[l]);
    }
    const auto n = static_cast<nn::Index>(cfg_.class_counts[cluster]);
    if (n == 0) return nn::Vector<T>();
    nn::Vector<T> logits = p_.out_w.topRows(n) * states.back().h.col(0) +
                           p_.out_b.col(0).head(n);
    return nn::softmax<T>(logits);
  }

  void to_checkpoint(Checkpoint& ckpt) const {
    ckpt.meta["model"] = "cluster";
    ckpt.meta["clusters"] = std::to_string(cfg_.clusters);
    ckpt.meta["hidden"] = std::to_string(cfg_.hidden);
    ckpt.meta["layers"] = std::to_string(cfg_.layers);
    ckpt.meta["top_k"] = std::to_string(cfg_.top_k);
    std::string counts;
    for (std::size_t i = 0; i < cfg_.class_counts.size(); ++i) {
      counts += (i ? "," : "") + std::to_string(cfg_.class_counts[i]);
    }
    ckpt.meta["class_counts"] = counts;
    detail::put_layers(ckpt, p_.layers);
    ckpt.put("out/weights", p_.out_w);
    ckpt.put("out/bias", p_.out_b);
  }

  static ClusterLstm from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.meta.count("model") || ckpt.meta.at("model") != "cluster") {
      throw FormatError("checkpoint does not hold a cluster model");
    }
    ClusterModelConfig cfg;
    cfg.clusters = detail::meta_u64(ckpt, "clusters");
    cfg.hidden = static_cast<nn::Index>(detail::meta_u64(ckpt, "hidden"));
    cfg.layers = detail::meta_u64(ckpt, "layers");
    cfg.top_k = detail::meta_u64(ckpt, "top_k");
    const std::string& counts = ckpt.meta.at("class_counts");
    std::size_t pos = 0;
    while (pos < counts.size()) {
      std::size_t end = counts.find(',', pos);
      if (end == std::string::npos) end = counts.size();
      cfg.class_counts.push_back(std::stoull(counts.substr(pos, end - pos)));
      pos = end + 1;
    }
    ClusterLstm m(cfg, 0);
    detail::get_layers(ckpt, m.p_.layers);
    m.p_.out_w = detail::checked_matrix<T>(ckpt, "out/weights", m.p_.out_w.rows(),
                                           m.p_.out_w.cols());
    m.p_.out_b = detail::checked_matrix<T>(ckpt, "out/bias", m.p_.out_b.rows(), 1);
    return m;
  }

 private:
  void fill_input(nn::Matrix<T>& x, nn::Index col, std::size_t cluster,
                  double input) const {
    if (cluster >= cfg_.clusters) {
      throw DataError(fmt::format("cluster {} outside {} clusters", cluster,
                                  cfg_.clusters));
    }
    x(0, col) = static_cast<T>(input);
    x(1 + static_cast<nn::Index>(cluster), col) = T(1);
  }

  T run_window(const WindowBatch& batch, const ClusterEvents& ev,
               std::vector<nn::LstmState<T>>& states, bool backward) {
    const std::size_t steps = batch.steps();
    const std::size_t lanes = batch.lanes();
    std::vector<nn::Matrix<T>> xs(steps);
    std::vector<std::vector<ClassId>> labels(steps, std::vector<ClassId>(lanes));
    std::vector<std::vector<nn::Index>> limits(steps,
                                               std::vector<nn::Index>(lanes));
    for (std::size_t t = 0; t < steps; ++t) {
      xs[t] = nn::Matrix<T>::Zero(input_width(), static_cast<nn::Index>(lanes));
      for (std::size_t b = 0; b < lanes; ++b) {
        const std::size_t i = batch.index[t][b];
        const auto c = static_cast<std::size_t>(ev.cluster[i]);
        fill_input(xs[t], static_cast<nn::Index>(b), c, ev.input[i]);
        labels[t][b] = ev.label[i];
        limits[t][b] = static_cast<nn::Index>(cfg_.class_counts[c]);
      }
    }
    nn::LstmStack<T> stack;
    stack.layers = p_.layers;
    typename nn::LstmStack<T>::SequenceCache cache;
    auto tops = stack.forward(std::span<const nn::Matrix<T>>(xs), states,
                              &batch.reset, backward ? &cache : nullptr);
    if (!backward) {
      return detail::softmax_head<T>(p_.out_w, p_.out_b, tops, labels, &limits,
                                     nullptr, nullptr, nullptr);
    }
    for (auto& l : g_.layers) {
      l.weights.setZero();
      l.bias.setZero();
    }
    g_.out_w.setZero();
    g_.out_b.setZero();
    std::vector<nn::Matrix<T>> d_tops;
    const T loss = detail::softmax_head<T>(p_.out_w, p_.out_b, tops, labels,
                                           &limits, &g_.out_w, &g_.out_b,
                                           &d_tops);
    stack.backward(cache, std::span<const nn::Matrix<T>>(d_tops), &batch.reset,
                   g_.layers, nullptr);
    return loss;
  }

  ClusterModelConfig cfg_;
  Params p_;
  Params g_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::uint64_t steps = 1000;
  std::size_t batch_size = 64;
  std::size_t seq_len = 64;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdam;
  double lr = 0.001;
  double clip_norm = 5.0;
};

// Resumable training loop: one call to step() is one optimizer update on
// a (seq_len x batch_size) window. Recurrent state carries across windows.
template <typename Model, typename Events>
class TrainingSession {
 public:
  using Scalar = typename std::remove_reference_t<
      decltype(std::declval<Model&>().params().out_w)>::Scalar;

  TrainingSession(Model& model, const Events& events, const TrainConfig& cfg)
      : model_(model),
        events_(events),
        cfg_(cfg),
        batcher_(events.segment_start, cfg.batch_size, cfg.seq_len),
        optimizer_(cfg.optimizer, cfg.lr),
        states_(model.zero_states(static_cast<nn::Index>(batcher_.lanes()))) {}

  double step() {
    const WindowBatch batch = batcher_.next();
    const Scalar loss = model_.loss_and_gradients(batch, events_, states_);
    auto refs = model_.param_refs();
    nn::clip_global_norm(refs, cfg_.clip_norm);
    optimizer_.step(refs);
    const double l = static_cast<double>(loss);
    losses_.push_back(l);
    return l;
  }

  void run(std::uint64_t steps) {
    for (std::uint64_t i = 0; i < steps; ++i) step();
  }

  std::uint64_t steps_done() const { return optimizer_.steps(); }
  const std::vector<double>& losses() const { return losses_; }
  nn::Optimizer<Scalar>& optimizer() { return optimizer_; }

 private:
  Model& model_;
  const Events& events_;
  TrainConfig cfg_;
  LaneBatcher batcher_;
  nn::Optimizer<Scalar> optimizer_;
  std::vector<nn::LstmState<Scalar>> states_;
  std::vector<double> losses_;
};

// ---------------------------------------------------------------------------
// Inference

// One embedding-model step: top-K over the output vocabulary, reported as
// raw deltas. Label fields are left for the caller.
template <typename T>
PredictionSet embedding_model_step(const EmbeddingLstm<T>& model,
                                   const DeltaVocab& deltas, ClassId pc,
                                   ClassId delta,
                                   std::vector<nn::LstmState<T>>& states) {
  const auto probs = model.step(pc, delta, states);
  const std::size_t k = std::min<std::size_t>(model.config().top_k,
                                              static_cast<std::size_t>(probs.size()));
  PredictionSet ps;
  for (const auto& [id, p] :
       nn::topk<T>(std::span<const T>(probs.data(), probs.size()), k)) {
    ps.predictions.emplace_back(deltas.decode(static_cast<ClassId>(id)),
                                static_cast<double>(p));
  }
  return ps;
}

// One clustering-model step on cluster `cluster`'s own state.
template <typename T>
PredictionSet cluster_model_step(const ClusterLstm<T>& model,
                                 const ClusterContext& ctx,
                                 std::size_t cluster, double normalized_delta,
                                 std::vector<nn::LstmState<T>>& states) {
  const auto probs = model.step(cluster, normalized_delta, states);
  const std::size_t k = std::min<std::size_t>(model.config().top_k,
                                              static_cast<std::size_t>(probs.size()));
  PredictionSet ps;
  for (const auto& [id, p] :
       nn::topk<T>(std::span<const T>(probs.data(), probs.size()), k)) {
    ps.predictions.emplace_back(
        ctx.vocabs[cluster].decode(static_cast<ClassId>(id)),
        static_cast<double>(p));
  }
  return ps;
}

// Runs the model over `misses` from zero state; one set per miss except the
// last.
template <typename T>
std::vector<PredictionSet> run_inference(const EmbeddingLstm<T>& model,
                                         const PcVocab& pcs,
                                         const DeltaVocab& deltas,
                                         std::span<const MissRecord> misses) {
  std::vector<PredictionSet> out;
  if (misses.size() < 2) return out;
  auto states = model.zero_states(1);
  out.reserve(misses.size() - 1);
  ClassId prev = deltas.oov_input();
  for (std::size_t n = 0; n + 1 < misses.size(); ++n) {
    PredictionSet ps = embedding_model_step(model, deltas,
                                            pcs.encode(misses[n].pc), prev,
                                            states);
    ps.timestep = misses[n].timestep;
    ps.label = static_cast<Delta>(misses[n + 1].line_addr - misses[n].line_addr);
    ps.label_in_vocab = deltas.encode_output(ps.label) != DeltaVocab::kOovOutput;
    prev = deltas.encode_input(ps.label);
    out.push_back(std::move(ps));
  }
  return out;
}

// One set per miss that has a later miss in the same cluster, in miss
// order. Each cluster keeps its own state, starting from zero.
template <typename T>
std::vector<PredictionSet> run_inference(const ClusterLstm<T>& model,
                                         const ClusterContext& ctx,
                                         std::span<const MissRecord> misses) {
  const std::size_t n = misses.size();
  const std::size_t k = ctx.kmeans.k;
  std::vector<std::size_t> cluster(n);
  std::vector<std::size_t> next(n, SIZE_MAX);
  std::vector<std::size_t> last(k, SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = ctx.kmeans.assign(misses[i].line_addr);
    if (last[cluster[i]] != SIZE_MAX) next[last[cluster[i]]] = i;
    last[cluster[i]] = i;
  }
  std::vector<std::vector<nn::LstmState<T>>> states(k, model.zero_states(1));
  std::vector<double> prev_input(k, 0.0);
  std::vector<PredictionSet> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = cluster[i];
    PredictionSet ps =
        cluster_model_step(model, ctx, c, prev_input[c], states[c]);
    if (next[i] == SIZE_MAX) continue;
    ps.timestep = misses[i].timestep;
    ps.label =
        static_cast<Delta>(misses[next[i]].line_addr - misses[i].line_addr);
    ps.label_in_vocab =
        ctx.vocabs[c].encode_output(ps.label) != DeltaVocab::kOovOutput;
    prev_input[c] = normalize_delta(ps.label, ctx.norms[c]);
    out.push_back(std::move(ps));
  }
  return out;
}

// Optimizer state round trip (tensors "opt/<slot>/<param>").
template <typename T>
void save_optimizer(Checkpoint& ckpt, const nn::Optimizer<T>& opt,
                    const std::vector<nn::ParamRef<T>>& refs) {
  ckpt.meta["opt.kind"] =
      opt.kind() == nn::OptimizerKind::kAdam ? "adam" : "adagrad";
  ckpt.meta["opt.steps"] = std::to_string(opt.steps());
  if (opt.kind() == nn::OptimizerKind::kAdam) {
    const auto& st = opt.adam_states();
    for (std::size_t i = 0; i < st.size() && i < refs.size(); ++i) {
      ckpt.put("opt/m/" + refs[i].name, st[i].m);
      ckpt.put("opt/v/" + refs[i].name, st[i].v);
    }
  } else {
    const auto& st = opt.adagrad_states();
    for (std::size_t i = 0; i < st.size() && i < refs.size(); ++i) {
      ckpt.put("opt/accum/" + refs[i].name, st[i].accum);
    }
  }
}

template <typename T>
nn::Optimizer<T> load_optimizer(const Checkpoint& ckpt,
                                const std::vector<nn::ParamRef<T>>& refs,
                                double lr) {
  const auto it = ckpt.meta.find("opt.kind");
  if (it == ckpt.meta.end()) throw FormatError("checkpoint has no optimizer state");
  const bool adam = it->second == "adam";
  nn::Optimizer<T> opt(adam ? nn::OptimizerKind::kAdam : nn::OptimizerKind::kAdagrad,
                       lr);
  const std::uint64_t steps = detail::meta_u64(ckpt, "opt.steps");
  opt.set_steps(steps);
  if (steps == 0) return opt;
  if (adam) {
    auto& st = opt.adam_states();
    st.resize(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      st[i].m = ckpt.matrix<T>("opt/m/" + refs[i].name);
      st[i].v = ckpt.matrix<T>("opt/v/" + refs[i].name);
      st[i].step = steps;
    }
  } else {
    auto& st = opt.adagrad_states();
    st.resize(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      st[i].accum = ckpt.matrix<T>("opt/accum/" + refs[i].name);
    }
  }
  return opt;
}

}  // namespace pfbench
