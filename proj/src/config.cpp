#include "pfbench/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pfbench/checkpoint.hpp"

namespace pfbench {

namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

std::string optimizer_name(nn::OptimizerKind k) {
  return k == nn::OptimizerKind::kAdam ? "adam" : "adagrad";
}

nn::OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return nn::OptimizerKind::kAdam;
  if (s == "adagrad") return nn::OptimizerKind::kAdagrad;
  throw ConfigError(fmt::format("unknown optimizer '{}'", s));
}

std::string layout_name(PcLayout l) {
  return l == PcLayout::kChained ? "chained" : "per_pc";
}

PcLayout parse_layout(const std::string& s) {
  if (s == "chained") return PcLayout::kChained;
  if (s == "per_pc") return PcLayout::kPerPc;
  throw ConfigError(fmt::format("unknown pc layout '{}'", s));
}

std::string schedule_name(PcSchedule s) {
  switch (s) {
    case PcSchedule::kRandom:
      return "random";
    case PcSchedule::kRoundRobin:
      return "round_robin";
    case PcSchedule::kBurst:
      return "burst";
  }
  return "random";
}

PcSchedule parse_schedule(const std::string& s) {
  if (s == "random") return PcSchedule::kRandom;
  if (s == "round_robin") return PcSchedule::kRoundRobin;
  if (s == "burst") return PcSchedule::kBurst;
  throw ConfigError(fmt::format("unknown pc schedule '{}'", s));
}

SyntheticSpec parse_synthetic(const json& j) {
  only_keys(j, "synthetic",
            {"kind", "length", "seed", "pc_base", "start", "strides",
             "stream_spacing", "pc_delta_cycles", "layout", "schedule",
             "burst_length", "regions", "hop_probability", "node_count",
             "node_size", "heap_slots", "heap_base", "num_deltas", "num_pcs",
             "max_delta_lines", "line_size"});
  SyntheticSpec s;
  s.kind = parse_synthetic_kind(j.at("kind").get<std::string>());
  read(j, "length", s.length);
  read(j, "seed", s.seed);
  read(j, "pc_base", s.pc_base);
  read(j, "start", s.start);
  read(j, "strides", s.strides);
  read(j, "stream_spacing", s.stream_spacing);
  read(j, "pc_delta_cycles", s.pc_delta_cycles);
  if (j.contains("layout")) s.layout = parse_layout(j.at("layout").get<std::string>());
  if (j.contains("schedule")) {
    s.schedule = parse_schedule(j.at("schedule").get<std::string>());
  }
  read(j, "burst_length", s.burst_length);
  if (j.contains("regions")) {
    for (const auto& r : j.at("regions")) {
      only_keys(r, "region", {"base", "deltas"});
      s.regions.push_back({r.at("base").get<std::uint64_t>(),
                           r.at("deltas").get<std::vector<std::int64_t>>()});
    }
  }
  read(j, "hop_probability", s.hop_probability);
  read(j, "node_count", s.node_count);
  read(j, "node_size", s.node_size);
  read(j, "heap_slots", s.heap_slots);
  read(j, "heap_base", s.heap_base);
  read(j, "num_deltas", s.num_deltas);
  read(j, "num_pcs", s.num_pcs);
  read(j, "max_delta_lines", s.max_delta_lines);
  read(j, "line_size", s.line_size);
  validate(s);
  return s;
}

json synthetic_json(const SyntheticSpec& s) {
  json regions = json::array();
  for (const auto& r : s.regions) {
    regions.push_back({{"base", r.base}, {"deltas", r.deltas}});
  }
  return {{"kind", to_string(s.kind)},
          {"length", s.length},
          {"seed", s.seed},
          {"pc_base", s.pc_base},
          {"start", s.start},
          {"strides", s.strides},
          {"stream_spacing", s.stream_spacing},
          {"pc_delta_cycles", s.pc_delta_cycles},
          {"layout", layout_name(s.layout)},
          {"schedule", schedule_name(s.schedule)},
          {"burst_length", s.burst_length},
          {"regions", regions},
          {"hop_probability", s.hop_probability},
          {"node_count", s.node_count},
          {"node_size", s.node_size},
          {"heap_slots", s.heap_slots},
          {"heap_base", s.heap_base},
          {"num_deltas", s.num_deltas},
          {"num_pcs", s.num_pcs},
          {"max_delta_lines", s.max_delta_lines},
          {"line_size", s.line_size}};
}

json to_json_doc(const ExperimentConfig& c) {
  json datasets = json::array();
  for (const auto& d : c.datasets) {
    json dj = {{"name", d.name}};
    if (d.trace_path) {
      dj["trace"] = *d.trace_path;
      dj["format"] = to_string(d.format);
    }
    if (d.synthetic) dj["synthetic"] = synthetic_json(*d.synthetic);
    datasets.push_back(dj);
  }
  json levels = json::array();
  for (const auto& l : c.hierarchy.hierarchy.levels) {
    levels.push_back({{"capacity", l.capacity},
                      {"associativity", l.associativity},
                      {"line_size", l.line_size}});
  }
  const auto& e = c.models.embedding;
  const auto& k = c.models.cluster;
  return {
      {"datasets", datasets},
      {"hierarchy",
       {{"bypass", c.hierarchy.bypass},
        {"levels", levels},
        {"miss_emit_level", c.hierarchy.hierarchy.miss_emit_level}}},
      {"vocab",
       {{"max_output", c.vocab.max_output}, {"min_count", c.vocab.min_count}}},
      {"clustering",
       {{"k", c.clustering.k},
        {"iters", c.clustering.iters},
        {"seed", c.clustering.seed},
        {"max_output_per_cluster", c.clustering.max_output_per_cluster}}},
      {"models",
       {{"selected", c.models.selected},
        {"embedding",
         {{"embedding_dim", e.embedding_dim},
          {"hidden", e.hidden},
          {"layers", e.layers},
          {"optimizer", optimizer_name(e.optimizer)},
          {"lr", e.lr},
          {"steps", e.steps}}},
        {"cluster",
         {{"hidden", k.hidden},
          {"layers", k.layers},
          {"optimizer", optimizer_name(k.optimizer)},
          {"lr", k.lr},
          {"steps", k.steps}}}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"seq_len", c.train.seq_len},
        {"clip_norm", c.train.clip_norm},
        {"float64", c.train.float64}}},
      {"eval",
       {{"k", c.eval.k}, {"train_fraction", c.eval.split.train_fraction}}},
      {"baselines",
       {{"enabled", c.baselines.enabled},
        {"stream",
         {{"max_streams", c.baselines.stream.max_streams},
          {"window", c.baselines.stream.window},
          {"confirm", c.baselines.stream.confirm},
          {"distance", c.baselines.stream.distance}}},
        {"ghb",
         {{"index_entries", c.baselines.ghb.index_entries},
          {"buffer_entries", c.baselines.ghb.buffer_entries},
          {"depth", c.baselines.ghb.depth}}}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"workers", c.workers}};
}

void validate_config(const ExperimentConfig& c) {
  std::set<std::string> names;
  for (const auto& d : c.datasets) {
    if (d.name.empty()) throw ConfigError("dataset without a name");
    if (!names.insert(d.name).second) {
      throw ConfigError(fmt::format("duplicate dataset '{}'", d.name));
    }
    if (d.trace_path.has_value() == d.synthetic.has_value()) {
      throw ConfigError(fmt::format(
          "dataset '{}' needs exactly one of 'trace' or 'synthetic'", d.name));
    }
  }
  if (!c.hierarchy.bypass) validate(c.hierarchy.hierarchy);
  if (c.vocab.max_output < 1 || c.vocab.min_count < 1) {
    throw ConfigError("vocab.max_output and vocab.min_count must be >= 1");
  }
  if (c.clustering.k < 1 || c.clustering.max_output_per_cluster < 1) {
    throw ConfigError("clustering.k and max_output_per_cluster must be >= 1");
  }
  for (const auto& m : c.models.selected) {
    if (std::find(kModelNames.begin(), kModelNames.end(), m) ==
        kModelNames.end()) {
      throw ConfigError(fmt::format("unknown model '{}'", m));
    }
  }
  const auto& e = c.models.embedding;
  if (e.embedding_dim < 1 || e.hidden < 1 || e.layers < 1 ||
      c.models.cluster.hidden < 1 || c.models.cluster.layers < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (e.lr <= 0 || c.models.cluster.lr <= 0) {
    throw ConfigError("learning rates must be positive");
  }
  if (c.train.batch_size < 1 || c.train.seq_len < 1) {
    throw ConfigError("train.batch_size and train.seq_len must be >= 1");
  }
  if (c.eval.k < 1) throw ConfigError("eval.k must be >= 1");
  if (!(c.eval.split.train_fraction > 0 && c.eval.split.train_fraction < 1)) {
    throw ConfigError("eval.train_fraction must lie in (0, 1)");
  }
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(json_text);
    only_keys(j, "config",
              {"datasets", "hierarchy", "vocab", "clustering", "models",
               "train", "eval", "baselines", "output_dir", "seed", "workers"});
    if (j.contains("datasets")) {
      for (const auto& d : j.at("datasets")) {
        only_keys(d, "dataset", {"name", "trace", "format", "synthetic"});
        DatasetConfig ds;
        ds.name = d.at("name").get<std::string>();
        if (d.contains("trace")) ds.trace_path = d.at("trace").get<std::string>();
        if (d.contains("format")) {
          ds.format = parse_trace_format(d.at("format").get<std::string>());
        }
        if (d.contains("synthetic")) ds.synthetic = parse_synthetic(d.at("synthetic"));
        c.datasets.push_back(std::move(ds));
      }
    }
    if (j.contains("hierarchy")) {
      const auto& h = j.at("hierarchy");
      only_keys(h, "hierarchy", {"bypass", "levels", "miss_emit_level"});
      read(h, "bypass", c.hierarchy.bypass);
      if (h.contains("levels")) {
        c.hierarchy.hierarchy.levels.clear();
        for (const auto& l : h.at("levels")) {
          only_keys(l, "cache level", {"capacity", "associativity", "line_size"});
          CacheLevelConfig lc;
          read(l, "capacity", lc.capacity);
          read(l, "associativity", lc.associativity);
          read(l, "line_size", lc.line_size);
          c.hierarchy.hierarchy.levels.push_back(lc);
        }
        c.hierarchy.hierarchy.miss_emit_level =
            c.hierarchy.hierarchy.levels.empty()
                ? 0
                : c.hierarchy.hierarchy.levels.size() - 1;
      }
      read(h, "miss_emit_level", c.hierarchy.hierarchy.miss_emit_level);
    }
    if (j.contains("vocab")) {
      const auto& v = j.at("vocab");
      only_keys(v, "vocab", {"max_output", "min_count"});
      read(v, "max_output", c.vocab.max_output);
      read(v, "min_count", c.vocab.min_count);
    }
    if (j.contains("clustering")) {
      const auto& v = j.at("clustering");
      only_keys(v, "clustering", {"k", "iters", "seed", "max_output_per_cluster"});
      read(v, "k", c.clustering.k);
      read(v, "iters", c.clustering.iters);
      read(v, "seed", c.clustering.seed);
      read(v, "max_output_per_cluster", c.clustering.max_output_per_cluster);
    }
    if (j.contains("models")) {
      const auto& m = j.at("models");
      only_keys(m, "models", {"selected", "embedding", "cluster"});
      read(m, "selected", c.models.selected);
      if (m.contains("embedding")) {
        const auto& e = m.at("embedding");
        only_keys(e, "models.embedding",
                  {"embedding_dim", "hidden", "layers", "optimizer", "lr", "steps"});
        auto& h = c.models.embedding;
        read(e, "embedding_dim", h.embedding_dim);
        read(e, "hidden", h.hidden);
        read(e, "layers", h.layers);
        if (e.contains("optimizer")) {
          h.optimizer = parse_optimizer(e.at("optimizer").get<std::string>());
        }
        read(e, "lr", h.lr);
        read(e, "steps", h.steps);
      }
      if (m.contains("cluster")) {
        const auto& e = m.at("cluster");
        only_keys(e, "models.cluster", {"hidden", "layers", "optimizer", "lr", "steps"});
        auto& h = c.models.cluster;
        read(e, "hidden", h.hidden);
        read(e, "layers", h.layers);
        if (e.contains("optimizer")) {
          h.optimizer = parse_optimizer(e.at("optimizer").get<std::string>());
        }
        read(e, "lr", h.lr);
        read(e, "steps", h.steps);
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      only_keys(t, "train", {"batch_size", "seq_len", "clip_norm", "float64"});
      read(t, "batch_size", c.train.batch_size);
      read(t, "seq_len", c.train.seq_len);
      read(t, "clip_norm", c.train.clip_norm);
      read(t, "float64", c.train.float64);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      only_keys(e, "eval", {"k", "train_fraction"});
      read(e, "k", c.eval.k);
      read(e, "train_fraction", c.eval.split.train_fraction);
    }
    if (j.contains("baselines")) {
      const auto& b = j.at("baselines");
      only_keys(b, "baselines", {"enabled", "stream", "ghb"});
      read(b, "enabled", c.baselines.enabled);
      if (b.contains("stream")) {
        const auto& s = b.at("stream");
        only_keys(s, "baselines.stream", {"max_streams", "window", "confirm", "distance"});
        read(s, "max_streams", c.baselines.stream.max_streams);
        read(s, "window", c.baselines.stream.window);
        read(s, "confirm", c.baselines.stream.confirm);
        read(s, "distance", c.baselines.stream.distance);
      }
      if (b.contains("ghb")) {
        const auto& g = b.at("ghb");
        only_keys(g, "baselines.ghb", {"index_entries", "buffer_entries", "depth"});
        read(g, "index_entries", c.baselines.ghb.index_entries);
        read(g, "buffer_entries", c.baselines.ghb.buffer_entries);
        read(g, "depth", c.baselines.ghb.depth);
      }
    }
    read(j, "output_dir", c.output_dir);
    read(j, "seed", c.seed);
    read(j, "workers", c.workers);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("invalid config: {}", e.what()));
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open config {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& config) {
  return to_json_doc(config).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json_doc(config);
  j.erase("workers");
  j.erase("output_dir");
  return hex64(fnv1a64(j.dump()));
}

}  // namespace pfbench
