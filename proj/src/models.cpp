#include "pfbench/models.hpp"

#include <charconv>

namespace pfbench {

Modality parse_modality(const std::string& s) {
  if (s == "both") return Modality::kBoth;
  if (s == "pc_only") return Modality::kPcOnly;
  if (s == "delta_only") return Modality::kDeltaOnly;
  throw ConfigError(fmt::format("unknown modality '{}'", s));
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::kBoth:
      return "both";
    case Modality::kPcOnly:
      return "pc_only";
    case Modality::kDeltaOnly:
      return "delta_only";
  }
  return "both";
}

EmbeddingEvents make_embedding_events(std::span<const MissRecord> misses,
                                      const PcVocab& pcs,
                                      const DeltaVocab& deltas) {
  EmbeddingEvents ev;
  if (misses.size() < 2) return ev;
  const std::size_t n = misses.size() - 1;
  ev.pc.reserve(n);
  ev.delta_in.reserve(n);
  ev.label.reserve(n);
  ev.segment_start.assign(n, 0);
  ev.segment_start[0] = 1;
  ClassId prev = deltas.oov_input();
  for (std::size_t i = 0; i < n; ++i) {
    const auto d =
        static_cast<Delta>(misses[i + 1].line_addr - misses[i].line_addr);
    ev.pc.push_back(pcs.encode(misses[i].pc));
    ev.delta_in.push_back(prev);
    ev.label.push_back(deltas.encode_output(d));
    prev = deltas.encode_input(d);
  }
  return ev;
}

std::size_t ClusterContext::max_classes() const {
  std::size_t m = 0;
  for (const auto& v : vocabs) m = std::max(m, v.num_output_classes());
  return m;
}

std::vector<std::size_t> ClusterContext::class_counts() const {
  std::vector<std::size_t> out;
  for (const auto& v : vocabs) out.push_back(v.num_output_classes());
  return out;
}

ClusterContext build_cluster_context(std::span<const MissRecord> train,
                                     ClusterModel kmeans,
                                     std::size_t max_output_per_cluster) {
  ClusterContext ctx;
  const ClusteredStream cs = partition_stream(train, kmeans);
  ctx.norms = cs.norms;
  for (const auto& sub : cs.sub_streams) {
    const auto values = delta_values(sub);
    // A cluster with fewer than two training misses has nothing to predict.
    ctx.vocabs.push_back(values.empty() ? DeltaVocab{}
                                        : DeltaVocab::build(
                                              values, max_output_per_cluster, 1));
  }
  ctx.kmeans = std::move(kmeans);
  return ctx;
}

ClusterEvents make_cluster_events(std::span<const MissRecord> misses,
                                  const ClusterContext& ctx) {
  const std::size_t k = ctx.kmeans.k;
  std::vector<std::vector<std::uint64_t>> lines(k);
  for (const auto& m : misses) {
    lines[ctx.kmeans.assign(m.line_addr)].push_back(m.line_addr);
  }
  ClusterEvents ev;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& ls = lines[c];
    for (std::size_t j = 0; j + 1 < ls.size(); ++j) {
      ev.cluster.push_back(static_cast<std::int32_t>(c));
      ev.input.push_back(
          j == 0 ? 0.0
                 : normalize_delta(static_cast<Delta>(ls[j] - ls[j - 1]),
                                   ctx.norms[c]));
      ev.label.push_back(
          ctx.vocabs[c].encode_output(static_cast<Delta>(ls[j + 1] - ls[j])));
      ev.segment_start.push_back(j == 0);
    }
  }
  return ev;
}

namespace detail {

std::uint64_t meta_u64(const Checkpoint& ckpt, const std::string& key) {
  const auto it = ckpt.meta.find(key);
  if (it == ckpt.meta.end()) {
    throw FormatError(fmt::format("checkpoint metadata lacks '{}'", key));
  }
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError(fmt::format("checkpoint metadata '{}' is not an integer", key));
  }
  return v;
}

}  // namespace detail

}  // namespace pfbench
