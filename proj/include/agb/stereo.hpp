#pragma once

#include <algorithm>
#include <cmath>

#include "agb/core/error.hpp"
#include "agb/core/raster.hpp"
#include "agb/core/types.hpp"

namespace agb::stereo {

/// Maximum canopy height that keeps 0.85 m of stereo clearance at 1.5 m.
inline constexpr double kMaxPlantHeightM = 0.65;

/// Z = f * B / d for every matched pixel; d == 0 (or non-finite) becomes NaN.
inline DepthMap disparity_to_depth(const DisparityMap& disp, const StereoIntrinsics& intr) {
  intr.validate();
  DepthMap depth(disp.width(), disp.height(), kInvalidMetric);
  const double fb = intr.focal_baseline();
  auto in = disp.values();
  auto out = depth.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float d = in[i];
    if (std::isfinite(d) && d > 0.0f) out[i] = static_cast<float>(fb / d);
  }
  return depth;
}

/// Inverse of disparity_to_depth, with the result snapped to the matcher's
/// subpixel grid. Invalid depth becomes disparity 0.
inline DisparityMap depth_to_disparity(const DepthMap& depth, const StereoIntrinsics& intr) {
  intr.validate();
  DisparityMap disp(depth.width(), depth.height(), kInvalidDisparity);
  const double fb = intr.focal_baseline();
  auto in = depth.values();
  auto out = disp.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float z = in[i];
    if (std::isfinite(z) && z > 0.0f)
      out[i] = static_cast<float>(std::round(fb / z / intr.subpixel_step) * intr.subpixel_step);
  }
  return disp;
}

/// h = clamp(camera_height - Z, 0, max_plant_height); NaN stays NaN.
inline HeightMap depth_to_height(const DepthMap& depth, double camera_height_m,
                                 double max_plant_height_m = kMaxPlantHeightM) {
  if (!(camera_height_m > max_plant_height_m) || !(max_plant_height_m >= 0))
    throw DomainError("camera height must exceed the maximum plant height");
  HeightMap height(depth.width(), depth.height(), kInvalidMetric);
  auto in = depth.values();
  auto out = height.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float z = in[i];
    if (std::isnan(z)) continue;
    out[i] = static_cast<float>(std::clamp(camera_height_m - z, 0.0, max_plant_height_m));
  }
  return height;
}

/// Depth change produced by one disparity quantization step at range z:
/// dZ = z^2 * step / (f * B).
inline double depth_resolution(double z_m, const StereoIntrinsics& intr) {
  intr.validate();
  if (!(z_m > 0)) throw DomainError("depth resolution needs a positive range");
  return z_m * z_m * intr.subpixel_step / intr.focal_baseline();
}

/// Convenience wrapper bundling intrinsics with the resolution law.
class DepthResolutionModel {
 public:
  explicit DepthResolutionModel(StereoIntrinsics intr) : intr_(intr) { intr_.validate(); }
  double at(double z_m) const { return depth_resolution(z_m, intr_); }
  const StereoIntrinsics& intrinsics() const noexcept { return intr_; }

 private:
  StereoIntrinsics intr_;
};

inline std::size_t count_invalid(const DepthMap& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(),
                                                [](float v) { return std::isnan(v); }));
}
inline std::size_t count_invalid(const HeightMap& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(),
                                                [](float v) { return std::isnan(v); }));
}
inline std::size_t count_invalid(const DisparityMap& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(),
                                                [](float v) { return !(std::isfinite(v) && v > 0.0f); }));
}

}  // namespace agb::stereo
