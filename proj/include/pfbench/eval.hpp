#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pfbench/error.hpp"
#include "pfbench/prediction.hpp"
#include "pfbench/trace.hpp"

namespace pfbench {

struct SplitSpec {
  double train_fraction = 0.7;
};

inline constexpr std::size_t kMinSplitLength = 10;

// Index of the temporal cut, floor(fraction * n). Throws DataError when
// n < kMinSplitLength and ConfigError for a fraction outside (0, 1).
std::size_t split_point(std::size_t n, const SplitSpec& spec = {});

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(std::span<const T> stream,
                                                const SplitSpec& spec = {}) {
  const std::size_t cut = split_point(stream.size(), spec);
  return {std::vector<T>(stream.begin(), stream.begin() + cut),
          std::vector<T>(stream.begin() + cut, stream.end())};
}

// Fraction of events whose true delta is in the predicted set. Labels the
// model cannot represent and empty prediction sets count as failures.
// Throws DataError when the sequences differ in length.
double precision_at_k(std::span<const PredictionSet> preds,
                      std::span<const Delta> labels);
double precision_at_k(std::span<const PredictionSet> preds);

// |union(predicted) & union(labels)| / |union(labels)|.
double recall_at_k(std::span<const PredictionSet> preds,
                   std::span<const Delta> labels);
double recall_at_k(std::span<const PredictionSet> preds);

std::vector<Delta> labels_of(std::span<const PredictionSet> preds);

inline constexpr double kGeomeanFloor = 1e-4;

// exp(mean(ln v)) with each value clamped to [1e-4, 1]. Throws DataError on
// empty input.
double geomean(std::span<const double> values);

struct EvalRow {
  std::string dataset;
  std::string model;
  double precision = 0;
  double recall = 0;
  std::uint64_t num_predictions = 0;
  std::uint64_t num_oov_labels = 0;
};

EvalRow score(const std::string& dataset, const std::string& model,
              std::span<const PredictionSet> preds);

struct GeomeanRow {
  std::string model;
  double precision = 0;
  double recall = 0;
};

struct EvalReport {
  std::string config_hash;
  std::size_t k = 10;
  std::vector<EvalRow> rows;

  // Per model, in order of first appearance.
  std::vector<GeomeanRow> geomeans() const;
};

enum class ReportFormat { kCsv, kJson };

// CSV: header then one row per (dataset, model) in insertion order, columns
// dataset,model,precision_at_<k>,recall_at_<k>,num_predictions,
// num_oov_labels,config_hash. JSON: {config_hash, k, rows, geomean}.
std::string render_report(const EvalReport& report, ReportFormat format);
void emit_report(const EvalReport& report, ReportFormat format,
                 const std::string& path);
EvalReport parse_report_json(const std::string& text);

// CSV of (timestep, addr, line_addr) per miss.
void export_scatter(const std::string& path,
                    std::span<const MissRecord> misses);

}  // namespace pfbench
