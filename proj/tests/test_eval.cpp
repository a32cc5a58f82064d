#include <algorithm>
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "pfbench/error.hpp"
#include "pfbench/eval.hpp"
#include "pfbench/random.hpp"
#include "test_util.hpp"

namespace pfbench {
namespace {

PredictionSet make_set(std::vector<Delta> preds, Delta label, bool in_vocab = true) {
  PredictionSet p;
  for (Delta d : preds) p.predictions.emplace_back(d, 1.0);
  p.label = label;
  p.label_in_vocab = in_vocab;
  return p;
}

TEST(Precision, ThreeOfFourHits) {
  const std::vector<PredictionSet> s = {make_set({1, 2}, 1), make_set({1, 2}, 2),
                                        make_set({5}, 5), make_set({5}, 6)};
  EXPECT_DOUBLE_EQ(precision_at_k(s), 0.75);
}

TEST(Precision, EmptySetsAndOovLabelsFail) {
  const std::vector<PredictionSet> s = {make_set({}, 1), make_set({3}, 3, false)};
  EXPECT_DOUBLE_EQ(precision_at_k(s), 0.0);
  EXPECT_DOUBLE_EQ(precision_at_k(std::vector<PredictionSet>{}), 0.0);
}

TEST(Precision, LengthMismatchIsDataError) {
  const std::vector<PredictionSet> s = {make_set({1}, 1)};
  const std::vector<Delta> labels = {1, 2};
  EXPECT_THROW(precision_at_k(s, labels), DataError);
  EXPECT_THROW(recall_at_k(s, labels), DataError);
}

TEST(Recall, FullCoverage) {
  const std::vector<PredictionSet> s = {make_set({1, 2, 3}, 1), make_set({}, 2),
                                        make_set({}, 3)};
  EXPECT_DOUBLE_EQ(recall_at_k(s), 1.0);
}

TEST(Recall, QuarterCoverage) {
  const std::vector<PredictionSet> s = {make_set({1, 9}, 1), make_set({1}, 2),
                                        make_set({1}, 3), make_set({1}, 4)};
  EXPECT_DOUBLE_EQ(recall_at_k(s), 0.25);
}

TEST(Recall, BoundedAndAtLeastPrecisionCoverage) {
  // Every hit covers its label, so recall >= (distinct hit labels)/(distinct labels).
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PredictionSet> s;
    for (int i = 0; i < 50; ++i) {
      std::vector<Delta> preds;
      for (std::uint64_t j = rng.uniform(4); j > 0; --j) {
        preds.push_back(static_cast<Delta>(rng.uniform(12)));
      }
      s.push_back(make_set(preds, static_cast<Delta>(rng.uniform(12))));
    }
    const double p = precision_at_k(s);
    const double r = recall_at_k(s);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    if (p > 0) {
      EXPECT_GT(r, 0.0);
    }
  }
}

TEST(Split, SeventyThirty) {
  std::vector<int> v(10);
  for (int i = 0; i < 10; ++i) v[i] = i;
  const auto [train, test] = split<int>(v);
  EXPECT_EQ(train.size(), 7u);
  EXPECT_EQ(test.size(), 3u);
  EXPECT_EQ(test.front(), 7);
  EXPECT_EQ(split_point(101), 70u);
}

TEST(Split, Preconditions) {
  EXPECT_THROW(split_point(9), DataError);
  EXPECT_THROW(split_point(100, {0.0}), ConfigError);
  EXPECT_THROW(split_point(100, {1.0}), ConfigError);
}

TEST(Split, ConcatenationRestoresStream) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint64_t> v(10 + rng.uniform(500));
    for (auto& x : v) x = rng.next_u64();
    const double f = 0.05 + 0.9 * rng.unit();
    auto [a, b] = split<std::uint64_t>(v, {f});
    EXPECT_EQ(a.size(), static_cast<std::size_t>(std::floor(f * static_cast<double>(v.size()))));
    a.insert(a.end(), b.begin(), b.end());
    EXPECT_EQ(a, v);
  }
}

TEST(Geomean, Examples) {
  EXPECT_NEAR(geomean(std::vector<double>{0.5, 0.5}), 0.5, 1e-15);
  EXPECT_NEAR(geomean(std::vector<double>{1.0, 0.0}), 0.01, 1e-15);
  EXPECT_NEAR(geomean(std::vector<double>{0.25, 1.0}), 0.5, 1e-15);
  EXPECT_THROW(geomean(std::vector<double>{}), DataError);
}

TEST(Geomean, MonotoneInEachArgument) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.uniform(6));
    for (auto& x : v) x = rng.unit();
    const double base = geomean(v);
    const std::size_t i = rng.uniform(v.size());
    v[i] = std::min(1.0, v[i] + rng.unit() * 0.5);
    EXPECT_GE(geomean(v), base * (1 - 1e-15));
  }
}

EvalReport sample_report() {
  EvalReport r;
  r.config_hash = "00000000deadbeef";
  r.k = 10;
  r.rows = {{"ds1", "embedding", 0.5, 0.25, 100, 3},
            {"ds1", "stream", 0.125, 1.0, 100, 0},
            {"ds2", "embedding", 1.0, 0.5, 40, 0}};
  return r;
}

TEST(Report, CsvLayout) {
  const auto csv = render_report(sample_report(), ReportFormat::kCsv);
  const std::string header =
      "dataset,model,precision_at_10,recall_at_10,num_predictions,"
      "num_oov_labels,config_hash\n";
  ASSERT_EQ(csv.substr(0, header.size()), header);
  EXPECT_NE(csv.find("ds1,stream,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Report, JsonRoundTripMatchesCsv) {
  const auto rep = sample_report();
  const auto parsed = parse_report_json(render_report(rep, ReportFormat::kJson));
  EXPECT_EQ(parsed.config_hash, rep.config_hash);
  ASSERT_EQ(parsed.rows.size(), rep.rows.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    EXPECT_EQ(parsed.rows[i].dataset, rep.rows[i].dataset);
    EXPECT_EQ(parsed.rows[i].precision, rep.rows[i].precision);
    EXPECT_EQ(parsed.rows[i].num_oov_labels, rep.rows[i].num_oov_labels);
  }
  EXPECT_EQ(render_report(parsed, ReportFormat::kCsv),
            render_report(rep, ReportFormat::kCsv));
}

TEST(Report, GeomeansPerModelInFirstAppearanceOrder) {
  const auto g = sample_report().geomeans();
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].model, "embedding");
  EXPECT_NEAR(g[0].precision, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(g[0].recall, std::sqrt(0.125), 1e-15);
  EXPECT_EQ(g[1].model, "stream");
}

TEST(Report, EmitIsDeterministic) {
  testing::TempDir dir;
  emit_report(sample_report(), ReportFormat::kJson, dir.file("a.json"));
  emit_report(sample_report(), ReportFormat::kJson, dir.file("b.json"));
  std::ifstream a(dir.file("a.json")), b(dir.file("b.json"));
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_FALSE(sa.empty());
  EXPECT_EQ(sa, sb);
}

TEST(Score, CountsOovLabels) {
  const std::vector<PredictionSet> s = {make_set({1}, 1), make_set({1}, 7, false)};
  const auto row = score("d", "m", s);
  EXPECT_EQ(row.num_predictions, 2u);
  EXPECT_EQ(row.num_oov_labels, 1u);
  EXPECT_DOUBLE_EQ(row.precision, 0.5);
  EXPECT_DOUBLE_EQ(row.recall, 0.5);
}

}  // namespace
}  // namespace pfbench
