#pragma once

// Trains each requested model on the training side of a split and scores
// it on the held-out samples; renders a comparison table.

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agb/core/error.hpp"
#include "agb/core/parallel.hpp"
#include "agb/core/types.hpp"
#include "agb/eval/metrics.hpp"
#include "agb/eval/split.hpp"
#include "agb/features.hpp"
#include "agb/models/regressor.hpp"

namespace agb::eval {

struct ReferenceRow {
  const char* model;
  double r2;
  double rmse;
  double rrmse;
};

/// Published comparison of the four model families on field data. Shown for
/// context only; the field data is not available, so these are not recomputed.
inline constexpr std::array<ReferenceRow, 4> kReferenceRows{{
    {"RFR", 0.65, 0.0433, 14.82},
    {"SVR", 0.76, 0.0372, 12.74},
    {"ANN", 0.81, 0.0301, 10.31},
    {"ResNet 50", 0.88, 0.0289, 9.91},
}};

/// Per-sample model inputs, aligned with ds.samples.
struct SampleInputs {
  models::Matrix features;
  std::vector<Tensor> tensors;  // empty unless requested
  std::vector<double> targets;
};

inline constexpr std::size_t kWorkingResolution = 64;

inline SampleInputs extract_inputs(const Dataset& ds, bool with_tensors, std::size_t tensor_size = kWorkingResolution,
                                   unsigned threads = 1) {
  SampleInputs in;
  const std::size_t n = ds.samples.size();
  in.features = models::Matrix(n, features::FeatureVec::kDims);
  in.targets.resize(n);
  if (with_tensors) in.tensors.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const BiomassSample& s = ds.samples[i];
    const MultimodalFrame* f = ds.find_frame(s.frame_index);
    if (!f) throw DataError("sample " + std::to_string(s.id) + " has no linked frame");
    const auto v = features::feature_vector(*f, s.roi_px, ds.manifest.intrinsics).values();
    std::copy(v.begin(), v.end(), in.features.row(i).begin());
    in.targets[i] = s.dry_agb_kg_per_m2;
    if (with_tensors) in.tensors[i] = features::fusion_tensor(*f, s.roi_px, ds.manifest.intrinsics, tensor_size);
  });
  return in;
}

inline models::TrainingData subset(const SampleInputs& in, const std::vector<std::size_t>& idx) {
  models::TrainingData d;
  d.features = models::Matrix(idx.size(), in.features.cols);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto r = in.features.row(idx[k]);
    std::copy(r.begin(), r.end(), d.features.row(k).begin());
    d.targets.push_back(in.targets[idx[k]]);
    if (!in.tensors.empty()) d.tensors.push_back(in.tensors[idx[k]]);
  }
  return d;
}

inline double predict_sample(const models::Regressor& m, const SampleInputs& in, std::size_t i) {
  if (models::uses_tensors(m.kind())) return m.predict(in.tensors[i]);
  return m.predict(in.features.row(i));
}

struct SuiteRow {
  models::ModelKind kind{};
  std::optional<Metrics> metrics;
  std::string error;                // set when training or scoring failed
  std::vector<double> predictions;  // per sample; NaN where never tested
  std::vector<double> loss_trace;   // last partition's epoch losses
  std::optional<models::Regressor> model;  // fitted on the last partition's training side
};

struct ComparisonReport {
  std::string protocol;
  std::uint64_t seed = 0;
  std::size_t partitions = 0;
  std::size_t n_samples = 0;
  std::size_t n_test = 0;  // summed over partitions
  std::vector<SuiteRow> rows;

  std::string render() const;
  nlohmann::json to_json() const;
};

inline std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t w) {
  // Width in code points, so the superscript in R² lines up.
  std::size_t cps = 0;
  for (unsigned char c : s) cps += (c & 0xC0) != 0x80;
  if (cps < w) s.append(w - cps, ' ');
  return s;
}

inline std::string table_line(const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
  return pad(a, 14) + " | " + pad(b, 5) + " | " + pad(c, 12) + " | " + d + "\n";
}

inline std::string ComparisonReport::render() const {
  std::string out;
  out += "Dry above-ground biomass estimation: model comparison\n";
  out += "Protocol: " + protocol + ", seed " + std::to_string(seed) + ", " + std::to_string(n_samples) +
         " samples, " + std::to_string(n_test) + " scored\n\n";
  out += table_line("Model", "R²", "RMSE (kg/m²)", "RRMSE (%)");
  out += std::string(15, '-') + "+" + std::string(7, '-') + "+" + std::string(14, '-') + "+" + std::string(11, '-') + "\n";
  for (const auto& r : rows) {
    if (r.metrics)
      out += table_line(models::model_label(r.kind), format_fixed(r.metrics->r2, 2), format_fixed(r.metrics->rmse, 4),
                        format_fixed(r.metrics->rrmse, 2));
    else
      out += table_line(models::model_label(r.kind), "-", "-", "failed: " + r.error);
  }
  out += "\nPublished reference values (field data, frozen; not recomputed here):\n";
  out += table_line("Model", "R²", "RMSE (kg/m²)", "RRMSE (%)");
  for (const auto& r : kReferenceRows)
    out += table_line(r.model, format_fixed(r.r2, 2), format_fixed(r.rmse, 4), format_fixed(r.rrmse, 2));
  return out;
}

inline nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["seed"] = seed;
  j["partitions"] = partitions;
  j["samples"] = n_samples;
  j["scored"] = n_test;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"model", models::model_name(r.kind)}};
    if (r.metrics)
      row["metrics"] = {{"r2", r.metrics->r2}, {"rmse", r.metrics->rmse}, {"rrmse", r.metrics->rrmse}};
    else
      row["error"] = r.error;
    j["rows"].push_back(row);
  }
  j["reference"] = nlohmann::json::array();
  for (const auto& r : kReferenceRows)
    j["reference"].push_back({{"model", r.model}, {"r2", r.r2}, {"rmse", r.rmse}, {"rrmse", r.rrmse}});
  return j;
}

/// Rows follow the order of `kinds`. Failures are recorded in their row.
/// With several partitions the metrics pool every out-of-partition prediction.
inline ComparisonReport evaluate_suite(const Dataset& ds, const std::vector<models::ModelKind>& kinds,
                                       const models::ModelParams& params, const SplitSpec& spec, std::uint64_t seed,
                                       unsigned threads = 1, const SampleInputs* precomputed = nullptr) {
  ComparisonReport rep;
  rep.protocol = spec.describe();
  rep.seed = seed;
  rep.n_samples = ds.samples.size();
  if (kinds.empty()) return rep;

  const auto parts = split_dataset(ds, spec, seed);
  rep.partitions = parts.size();
  for (const auto& p : parts) rep.n_test += p.test.size();

  bool need_tensors = false;
  for (auto k : kinds) need_tensors |= models::uses_tensors(k);
  SampleInputs local;
  if (!precomputed || (need_tensors && precomputed->tensors.empty())) {
    local = extract_inputs(ds, need_tensors, kWorkingResolution, threads);
    precomputed = &local;
  }
  const SampleInputs& in = *precomputed;

  for (auto kind : kinds) {
    SuiteRow row;
    row.kind = kind;
    row.predictions.assign(ds.samples.size(), std::numeric_limits<double>::quiet_NaN());
    try {
      for (const auto& p : parts) {
        auto fit = models::train_model(kind, subset(in, p.train), params, threads);
        for (auto i : p.test) row.predictions[i] = predict_sample(fit.model, in, i);
        row.loss_trace = std::move(fit.loss_trace);
        row.model = std::move(fit.model);
      }
      std::vector<double> y, yhat;
      for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (!std::isnan(row.predictions[i])) {
          y.push_back(in.targets[i]);
          yhat.push_back(row.predictions[i]);
        }
      row.metrics = compute_metrics(y, yhat);
    } catch (const NumericError& e) {
      row.error = e.what();
    } catch (const DataError& e) {
      row.error = e.what();
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace agb::eval
