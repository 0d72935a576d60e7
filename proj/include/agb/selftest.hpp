#pragma once

// Quick internal consistency checks run by `agb selftest`.

#include <cmath>
#include <string>
#include <vector>

#include "agb/core/rng.hpp"
#include "agb/eval/metrics.hpp"
#include "agb/models/nn.hpp"
#include "agb/stereo.hpp"

namespace agb::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;  // worst error observed
  double limit = 0.0;
};

/// Max relative difference between compute_metrics and straight loops.
inline CheckResult metric_oracle(std::uint64_t seed, int trials = 200) {
  RandomStream rng(seed, "selftest-metrics");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform(0.05, 1.0);
      p[i] = y[i] + 0.1 * rng.normal();
    }
    const auto m = eval::compute_metrics(y, p);
    long double mean = 0, sse = 0, sst = 0;
    for (std::size_t i = 0; i < n; ++i) mean += y[i];
    mean /= n;
    for (std::size_t i = 0; i < n; ++i) {
      sse += (static_cast<long double>(y[i]) - p[i]) * (static_cast<long double>(y[i]) - p[i]);
      sst += (y[i] - mean) * (y[i] - mean);
    }
    const long double rmse = std::sqrt(sse / n);
    const double ref[3] = {static_cast<double>(1 - sse / sst), static_cast<double>(rmse),
                           static_cast<double>(rmse / mean * 100)};
    const double got[3] = {m.r2, m.rmse, m.rrmse};
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(got[k] - ref[k]) / std::max(1e-300, std::abs(ref[k])));
  }
  return {"metric oracle", worst < 1e-12, worst, 1e-12};
}

/// Relative error between backprop and central differences on a small net.
inline double gradient_error(nn::Network& net, const std::vector<Tensor>& xs, const std::vector<double>& ys,
                             double h = 1e-6) {
  std::vector<double> grad(net.params().size(), 0.0);
  nn::batch_loss_and_grad(net, xs, ys, grad);
  std::vector<double> dummy(net.params().size());
  double worst = 0.0;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double up = nn::batch_loss_and_grad(net, xs, ys, dummy);
    net.params()[i] = keep - h;
    const double down = nn::batch_loss_and_grad(net, xs, ys, dummy);
    net.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

inline CheckResult gradient_check(std::uint64_t seed) {
  RandomStream rng(seed, "selftest-grad");
  nn::NetParams p;
  p.stem_channels = 3;
  p.residual_blocks = 2;
  p.stem_stride = 1;
  nn::Network net = nn::make_residual_cnn({4, 6, 6}, p);
  net.init(rng);
  for (auto& v : net.params()) v += 0.05 * rng.normal();  // break the zero-initialised affine gains
  std::vector<Tensor> xs(8, Tensor(4, 6, 6));
  std::vector<double> ys(8);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (auto& v : xs[i].data) v = rng.uniform(-1, 1);
    ys[i] = rng.uniform(0.1, 0.9);
  }
  const double err = gradient_error(net, xs, ys);
  return {"gradient check", err < 1e-4, err, 1e-4};
}

/// disparity -> depth -> disparity stays within one quantization step.
inline CheckResult stereo_round_trip(std::uint64_t seed, std::size_t pixels = 100000) {
  const StereoIntrinsics intr;
  RandomStream rng(seed, "selftest-stereo");
  DisparityMap d(pixels, 1);
  for (std::size_t i = 0; i < pixels; ++i) {
    const double raw = rng.uniform(10.0, 200.0);
    d.at(i, 0) = static_cast<float>(std::round(raw / intr.subpixel_step) * intr.subpixel_step);
  }
  const DisparityMap back = stereo::depth_to_disparity(stereo::disparity_to_depth(d, intr), intr);
  double worst = 0.0;
  for (std::size_t i = 0; i < pixels; ++i) worst = std::max(worst, std::abs(double(back.at(i, 0)) - d.at(i, 0)));
  return {"stereo round trip", worst <= intr.subpixel_step, worst, intr.subpixel_step};
}

inline std::vector<CheckResult> run_all(std::uint64_t seed) {
  return {metric_oracle(seed), gradient_check(seed), stereo_round_trip(seed)};
}

}  // namespace agb::selftest
