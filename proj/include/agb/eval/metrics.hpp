#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "agb/core/error.hpp"

namespace agb::eval {

struct Metrics {
  double r2 = 0.0;
  double rmse = 0.0;   // kg/m^2
  double rrmse = 0.0;  // percent of the mean actual value
};

/// R^2 = 1 - SSE/SST, RMSE = sqrt(SSE/n), RRMSE = RMSE / mean(y) * 100.
inline Metrics compute_metrics(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw DomainError("actual and predicted vectors differ in length");
  if (y.size() < 2) throw DomainError("metrics need at least two samples");
  const auto n = static_cast<double>(y.size());
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= n;
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    const double d = y[i] - ybar;
    sse += e * e;
    sst += d * d;
  }
  if (!std::isfinite(sse) || !std::isfinite(sst)) throw UndefinedMetricError("non-finite values in metric inputs");
  const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (constant || sst == 0.0) throw UndefinedMetricError("R^2 is undefined: actual values have zero variance");
  if (ybar == 0.0) throw UndefinedMetricError("RRMSE is undefined: mean actual value is zero");
  Metrics m;
  m.r2 = 1.0 - sse / sst;
  m.rmse = std::sqrt(sse / n);
  m.rrmse = m.rmse / ybar * 100.0;
  return m;
}

}  // namespace agb::eval
