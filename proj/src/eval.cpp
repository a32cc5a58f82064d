#include "pfbench/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace pfbench {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DataError(
        fmt::format("{} prediction sets but {} labels", a, b));
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path));
  out << text;
  if (!out) throw IoError(fmt::format("write to {} failed", path));
}

}  // namespace

std::size_t split_point(std::size_t n, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError(
        fmt::format("train fraction {} outside (0, 1)", spec.train_fraction));
  }
  if (n < kMinSplitLength) {
    throw DataError(fmt::format("stream of {} events is too short to split "
                                "(need at least {})",
                                n, kMinSplitLength));
  }
  return static_cast<std::size_t>(
      std::floor(spec.train_fraction * static_cast<double>(n)));
}

double precision_at_k(std::span<const PredictionSet> preds,
                      std::span<const Delta> labels) {
  check_aligned(preds.size(), labels.size());
  if (preds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    hits += preds[i].label_in_vocab && preds[i].contains(labels[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double precision_at_k(std::span<const PredictionSet> preds) {
  const auto labels = labels_of(preds);
  return precision_at_k(preds, labels);
}

double recall_at_k(std::span<const PredictionSet> preds,
                   std::span<const Delta> labels) {
  check_aligned(preds.size(), labels.size());
  const std::set<Delta> truth(labels.begin(), labels.end());
  if (truth.empty()) return 0.0;
  std::set<Delta> predicted;
  for (const auto& p : preds) {
    for (const auto& [d, prob] : p.predictions) predicted.insert(d);
  }
  std::size_t covered = 0;
  for (Delta d : truth) covered += predicted.count(d);
  return static_cast<double>(covered) / static_cast<double>(truth.size());
}

double recall_at_k(std::span<const PredictionSet> preds) {
  const auto labels = labels_of(preds);
  return recall_at_k(preds, labels);
}

std::vector<Delta> labels_of(std::span<const PredictionSet> preds) {
  std::vector<Delta> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.label);
  return out;
}

double geomean(std::span<const double> values) {
  if (values.empty()) throw DataError("geometric mean of no values");
  double sum = 0;
  for (double v : values) {
    sum += std::log(std::clamp(v, kGeomeanFloor, 1.0));
  }
  return std::exp(sum / static_cast<double>(values.size()));
}

EvalRow score(const std::string& dataset, const std::string& model,
              std::span<const PredictionSet> preds) {
  EvalRow r;
  r.dataset = dataset;
  r.model = model;
  r.precision = precision_at_k(preds);
  r.recall = recall_at_k(preds);
  r.num_predictions = preds.size();
  for (const auto& p : preds) r.num_oov_labels += !p.label_in_vocab;
  return r;
}

std::vector<GeomeanRow> EvalReport::geomeans() const {
  std::vector<std::string> models;
  for (const auto& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) {
      models.push_back(r.model);
    }
  }
  std::vector<GeomeanRow> out;
  for (const auto& m : models) {
    std::vector<double> p, q;
    for (const auto& r : rows) {
      if (r.model != m) continue;
      p.push_back(r.precision);
      q.push_back(r.recall);
    }
    out.push_back({m, geomean(p), geomean(q)});
  }
  return out;
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    std::string out = fmt::format(
        "dataset,model,precision_at_{0},recall_at_{0},num_predictions,"
        "num_oov_labels,config_hash\n",
        report.k);
    for (const auto& r : report.rows) {
      out += fmt::format("{},{},{},{},{},{},{}\n", r.dataset, r.model,
                         r.precision, r.recall, r.num_predictions,
                         r.num_oov_labels, report.config_hash);
    }
    return out;
  }
  nlohmann::ordered_json j;
  j["config_hash"] = report.config_hash;
  j["k"] = report.k;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"dataset", r.dataset},
                         {"model", r.model},
                         {"precision", r.precision},
                         {"recall", r.recall},
                         {"num_predictions", r.num_predictions},
                         {"num_oov_labels", r.num_oov_labels}});
  }
  j["geomean"] = nlohmann::ordered_json::array();
  if (!report.rows.empty()) {
    for (const auto& g : report.geomeans()) {
      j["geomean"].push_back({{"model", g.model},
                              {"precision", g.precision},
                              {"recall", g.recall}});
    }
  }
  return j.dump(2) + "\n";
}

void emit_report(const EvalReport& report, ReportFormat format,
                 const std::string& path) {
  write_text(path, render_report(report, format));
}

EvalReport parse_report_json(const std::string& text) {
  EvalReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    report.config_hash = j.at("config_hash").get<std::string>();
    report.k = j.at("k").get<std::size_t>();
    for (const auto& r : j.at("rows")) {
      report.rows.push_back({r.at("dataset").get<std::string>(),
                             r.at("model").get<std::string>(),
                             r.at("precision").get<double>(),
                             r.at("recall").get<double>(),
                             r.at("num_predictions").get<std::uint64_t>(),
                             r.at("num_oov_labels").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed report: {}", e.what()));
  }
  return report;
}

void export_scatter(const std::string& path,
                    std::span<const MissRecord> misses) {
  std::string out = "timestep,addr,line_addr\n";
  for (const auto& m : misses) {
    out += fmt::format("{},{},{}\n", m.timestep, m.addr, m.line_addr);
  }
  write_text(path, out);
}

}  // namespace pfbench
