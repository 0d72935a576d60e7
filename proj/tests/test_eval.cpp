#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "agb/core/rng.hpp"
#include "agb/eval/map.hpp"
#include "agb/eval/metrics.hpp"
#include "agb/eval/split.hpp"
#include "agb/eval/suite.hpp"
#include "agb/synthfield.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::eval;

namespace {

// textbook formulas, two passes, long double
Metrics naive_metrics(const std::vector<double>& y, const std::vector<double>& p) {
  long double mean = 0;
  for (double v : y) mean += v;
  mean /= y.size();
  long double sse = 0, sst = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += (y[i] - p[i]) * (long double)(y[i] - p[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  Metrics m;
  m.r2 = static_cast<double>(1 - sse / sst);
  m.rmse = static_cast<double>(std::sqrt(sse / y.size()));
  m.rrmse = static_cast<double>(std::sqrt(sse / y.size()) / mean * 100);
  return m;
}

Dataset fake_dataset(int plots, int per_plot) {
  Dataset ds;
  std::int64_t id = 0;
  for (int p = 0; p < plots; ++p) {
    ds.plots.push_back({p, {p * 3.0, 0, 2, 1}, 1.0, 0, 0});
    for (int q = 0; q < per_plot; ++q) {
      BiomassSample s;
      s.id = id++;
      s.quadrat.plot_id = p;
      ds.samples.push_back(s);
    }
  }
  return ds;
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
  std::vector<double> y{0.1, 0.2, 0.4};
  auto m = compute_metrics(y, y);
  EXPECT_EQ(m.r2, 1.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.rrmse, 0.0);
}

TEST(Metrics, MeanPredictorHasZeroR2) {
  std::vector<double> y{0.1, 0.2, 0.6};
  std::vector<double> p(3, 0.3);
  EXPECT_NEAR(compute_metrics(y, p).r2, 0.0, 1e-15);
}

TEST(Metrics, RrmseGolden) {
  std::vector<double> y{0.2916 - 0.1, 0.2916 + 0.1};
  std::vector<double> p{y[0] + 0.0289, y[1] - 0.0289};
  auto m = compute_metrics(y, p);
  EXPECT_NEAR(m.rmse, 0.0289, 1e-12);
  EXPECT_NEAR(m.rrmse, 9.91, 0.005);
  EXPECT_NEAR(m.rrmse, 0.0289 / 0.2916 * 100, 1e-9);
}

TEST(Metrics, AgreesWithNaiveFormulas) {
  RandomStream r(3, "metrics");
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + r.below(200);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = r.uniform(0.01, 1.0);
      p[i] = y[i] + 0.1 * r.normal();
    }
    auto a = compute_metrics(y, p);
    auto b = naive_metrics(y, p);
    EXPECT_NEAR(a.r2, b.r2, 1e-12 * std::max(1.0, std::abs(b.r2)));
    EXPECT_NEAR(a.rmse, b.rmse, 1e-12);
    EXPECT_NEAR(a.rrmse, b.rrmse, 1e-10);
  }
}

TEST(Metrics, CommonShift) {
  std::vector<double> y{0.1, 0.3, 0.25, 0.5}, p{0.12, 0.28, 0.3, 0.45};
  auto base = compute_metrics(y, p);
  for (auto& v : y) v += 1.0;
  for (auto& v : p) v += 1.0;
  auto shifted = compute_metrics(y, p);
  EXPECT_NEAR(shifted.r2, base.r2, 1e-12);
  EXPECT_NEAR(shifted.rmse, base.rmse, 1e-12);
  EXPECT_LT(shifted.rrmse, base.rrmse);
}

TEST(Metrics, Undefined) {
  std::vector<double> flat{0.2, 0.2, 0.2}, p{0.1, 0.2, 0.3};
  EXPECT_THROW(compute_metrics(flat, p), UndefinedMetricError);
  std::vector<double> zero_mean{-0.1, 0.1}, q{0, 0};
  EXPECT_THROW(compute_metrics(zero_mean, q), UndefinedMetricError);
  std::vector<double> one{0.2};
  EXPECT_THROW(compute_metrics(one, one), DomainError);
  std::vector<double> two{0.1, 0.2};
  EXPECT_THROW(compute_metrics(two, p), DomainError);
}

TEST(Split, HoldoutCountsPlots) {
  EXPECT_EQ(holdout_test_groups(27, 0.2), 5u);
  auto ds = fake_dataset(27, 5);
  auto parts = split_dataset(ds, SplitSpec::parse("holdout:0.2"), 7);
  ASSERT_EQ(parts.size(), 1u);
  std::set<int> test_plots;
  for (auto i : parts[0].test) test_plots.insert(ds.samples[i].quadrat.plot_id);
  EXPECT_EQ(test_plots.size(), 5u);
  EXPECT_EQ(parts[0].test.size(), 25u);
  EXPECT_EQ(parts[0].train.size() + parts[0].test.size(), 135u);
}

TEST(Split, NoPlotLeaks) {
  auto ds = fake_dataset(27, 5);
  for (const char* s : {"holdout:0.2", "holdout:0.5", "kfold:5", "kfold:27"}) {
    for (const auto& p : split_dataset(ds, SplitSpec::parse(s), 11)) {
      std::set<int> train;
      for (auto i : p.train) train.insert(ds.samples[i].quadrat.plot_id);
      for (auto i : p.test) EXPECT_FALSE(train.contains(ds.samples[i].quadrat.plot_id)) << s;
    }
  }
}

TEST(Split, LeaveOnePlotOut) {
  auto ds = fake_dataset(27, 5);
  auto parts = split_dataset(ds, SplitSpec::parse("kfold:27"), 7);
  ASSERT_EQ(parts.size(), 27u);
  std::vector<int> seen(ds.samples.size(), 0);
  for (const auto& p : parts) {
    EXPECT_EQ(p.test.size(), 5u);
    for (auto i : p.test) ++seen[i];
  }
  for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(Split, SampleLevel) {
  auto ds = fake_dataset(4, 10);
  auto parts = split_dataset(ds, SplitSpec::parse("holdout:0.25:samples"), 7);
  EXPECT_EQ(parts[0].test.size(), 10u);
  std::set<int> plots;
  for (auto i : parts[0].test) plots.insert(ds.samples[i].quadrat.plot_id);
  EXPECT_GT(plots.size(), 1u);
}

TEST(Split, SeedDeterminism) {
  auto ds = fake_dataset(27, 5);
  auto a = split_dataset(ds, SplitSpec::parse("kfold:5"), 9);
  auto b = split_dataset(ds, SplitSpec::parse("kfold:5"), 9);
  auto c = split_dataset(ds, SplitSpec::parse("kfold:5"), 10);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].test, b[k].test);
    EXPECT_EQ(a[k].train, b[k].train);
    differs |= a[k].test != c[k].test;
  }
  EXPECT_TRUE(differs);
}

TEST(Split, Errors) {
  auto ds = fake_dataset(3, 2);
  EXPECT_THROW(split_dataset(ds, SplitSpec::parse("kfold:4"), 1), DomainError);
  auto one = fake_dataset(1, 5);
  EXPECT_THROW(split_dataset(one, SplitSpec::parse("holdout:0.2"), 1), DomainError);
  for (const char* bad : {"", "holdout:x", "holdout:1.5", "holdout:0", "kfold:1", "loo", "kfold:5:plots"})
    EXPECT_THROW(SplitSpec::parse(bad), UsageError) << bad;
  EXPECT_EQ(SplitSpec::parse("kfold").k, 5);
  EXPECT_DOUBLE_EQ(SplitSpec::parse("holdout").test_fraction, 0.2);
}

TEST(Suite, EmptyModelList) {
  auto ds = fake_dataset(3, 2);
  auto rep = evaluate_suite(ds, {}, models::ModelParams{}, SplitSpec{}, 7);
  EXPECT_TRUE(rep.rows.empty());
  EXPECT_NE(rep.render().find("ResNet 50"), std::string::npos);
}

TEST(Suite, RendersReferenceRows) {
  ComparisonReport rep;
  rep.protocol = SplitSpec{}.describe();
  const std::string text = rep.render();
  EXPECT_NE(text.find("Model          | R²    | RMSE (kg/m²) | RRMSE (%)"), std::string::npos);
  EXPECT_NE(text.find("ResNet 50      | 0.88  | 0.0289       | 9.91"), std::string::npos);
  EXPECT_NE(text.find("RFR            | 0.65  | 0.0433       | 14.82"), std::string::npos);
  EXPECT_NE(text.find("plot-disjoint hold-out"), std::string::npos);
  auto j = rep.to_json();
  EXPECT_EQ(j["reference"].size(), 4u);
  EXPECT_DOUBLE_EQ(j["reference"][3]["rmse"].get<double>(), 0.0289);
}

TEST(Suite, RfrOnSmallField) {
  auto g = synth::generate_field(agb::testing::small_config(), 1);
  auto rep = evaluate_suite(g.dataset, {models::ModelKind::Rfr}, models::ModelParams{}, SplitSpec{}, 7);
  ASSERT_EQ(rep.rows.size(), 1u);
  ASSERT_TRUE(rep.rows[0].metrics.has_value()) << rep.rows[0].error;
  EXPECT_EQ(rep.partitions, 1u);
  std::size_t scored = 0;
  for (double v : rep.rows[0].predictions) scored += !std::isnan(v);
  EXPECT_EQ(scored, rep.n_test);
  EXPECT_TRUE(rep.rows[0].model.has_value());
}

TEST(Map, SinglePlotConstant) {
  std::vector<Plot> plots{{0, {0, 0, 2, 1}, 1.0, 0, 0}};
  auto m = biomass_map(plots, {{1.0, 0.5, 0, 0.3}}, 0.25);
  EXPECT_EQ(m.raster.width(), 8u);
  EXPECT_EQ(m.raster.height(), 4u);
  for (float v : m.raster.values()) EXPECT_FLOAT_EQ(v, 0.3f);
}

TEST(Map, TwoPlotsWithGap) {
  std::vector<Plot> plots{{0, {0, 0, 2, 1}, 1.0, 0, 0}, {1, {3, 0, 2, 1}, 1.0, 0, 0}};
  // the 0.5 point sits closer to the first plot's right edge but belongs to plot 1
  std::vector<MapPoint> pts{{0.2, 0.5, 0, 0.1}, {3.1, 0.5, 1, 0.5}};
  auto m = biomass_map(plots, pts, 0.5);
  ASSERT_EQ(m.raster.width(), 10u);
  for (std::size_t y = 0; y < m.raster.height(); ++y) {
    for (std::size_t x = 0; x < 4; ++x) EXPECT_FLOAT_EQ(m.raster.at(x, y), 0.1f);
    for (std::size_t x = 4; x < 6; ++x) EXPECT_TRUE(std::isnan(m.raster.at(x, y)));
    for (std::size_t x = 6; x < 10; ++x) EXPECT_FLOAT_EQ(m.raster.at(x, y), 0.5f);
  }
}

TEST(Map, Errors) {
  std::vector<Plot> plots{{0, {0, 0, 2, 1}, 1.0, 0, 0}};
  EXPECT_THROW(biomass_map(plots, {}, 0.5), DomainError);
  EXPECT_THROW(biomass_map({}, {{0, 0, 0, 0.1}}, 0.5), DomainError);
  EXPECT_THROW(biomass_map(plots, {{0, 0, 0, 0.1}}, 0.0), DomainError);
}

TEST(Map, ValuesStayInPredictionRange) {
  auto g = synth::generate_field(agb::testing::small_config(), 1);
  std::vector<double> preds;
  RandomStream r(5, "preds");
  for (std::size_t i = 0; i < g.dataset.samples.size(); ++i) preds.push_back(r.uniform(0.0, 0.8));
  auto m = biomass_map(g.dataset.plots, map_points(g.dataset, preds), 0.5);
  const double lo = *std::min_element(preds.begin(), preds.end());
  const double hi = *std::max_element(preds.begin(), preds.end());
  std::size_t valid = 0;
  for (float v : m.raster.values()) {
    if (std::isnan(v)) continue;
    ++valid;
    EXPECT_GE(v, static_cast<float>(lo));
    EXPECT_LE(v, static_cast<float>(hi));
  }
  EXPECT_GT(valid, 0u);
  auto img = render_map(m.raster, 0.8);
  EXPECT_EQ(img.width(), m.raster.width());
}
