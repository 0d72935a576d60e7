#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agb/core/error.hpp"
#include "agb/core/raster.hpp"

namespace agb {

/// Paired-camera constants. The defaults are back-solved so that one
/// quantization step of disparity corresponds to 1 mm of depth at 1.5 m.
struct StereoIntrinsics {
  double focal_px = 937.5;
  double baseline_m = 0.075;
  double camera_height_m = 1.5;
  double subpixel_step = 1.0 / 32.0;

  double focal_baseline() const noexcept { return focal_px * baseline_m; }

  void validate() const {
    if (!(focal_px > 0) || !(baseline_m > 0) || !(camera_height_m > 0) || !(subpixel_step > 0))
      throw DomainError("stereo intrinsics must all be positive");
  }
  friend bool operator==(const StereoIntrinsics&, const StereoIntrinsics&) = default;
};

/// Sensor pose in the field frame: x east, y north, z up, heading about +z.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double heading_rad = 0.0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Axis-aligned rectangle in field meters.
struct WorldRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 0.0;
  double height = 0.0;

  double x1() const noexcept { return x0 + width; }
  double y1() const noexcept { return y0 + height; }
  double area() const noexcept { return width * height; }
  double center_x() const noexcept { return x0 + 0.5 * width; }
  double center_y() const noexcept { return y0 + 0.5 * height; }

  bool contains(double x, double y) const noexcept {
    return x >= x0 && x < x1() && y >= y0 && y < y1();
  }
  bool contains(const WorldRect& r, double eps = 1e-9) const noexcept {
    return r.x0 >= x0 - eps && r.y0 >= y0 - eps && r.x1() <= x1() + eps && r.y1() <= y1() + eps;
  }
  bool overlaps(const WorldRect& r) const noexcept {
    return x0 < r.x1() && r.x0 < x1() && y0 < r.y1() && r.y0 < y1();
  }
  friend bool operator==(const WorldRect&, const WorldRect&) = default;
};

struct Quadrat {
  int plot_id = 0;
  WorldRect roi;
  double side_m = 0.5;

  double area_m2() const noexcept { return side_m * side_m; }
};

struct BiomassSample {
  int id = 0;
  Quadrat quadrat;
  int date_index = 0;
  double dry_agb_kg_per_m2 = 0.0;
  /// Frame whose footprint contains the quadrat; -1 until linked.
  std::int64_t frame_index = -1;
  /// Quadrat window in that frame's pixel grid.
  PixelRect roi_px;
};

struct Plot {
  int id = 0;
  WorldRect rect;
  double density_factor = 1.0;
  int block = 0;
  int replication = 0;
};

/// Paired RGB + disparity capture. Rendering is orthographic, so the pixel
/// grid maps to the ground with a single sampling distance.
struct MultimodalFrame {
  RgbImage rgb;
  DisparityMap disparity;
  std::int64_t frame_index = 0;
  Pose pose;
  double gsd_m = 0.01;
  int date_index = 0;

  /// Ground position of the center of pixel (col, row).
  std::pair<double, double> pixel_to_world(double col, double row) const noexcept {
    const double lx = (col + 0.5 - 0.5 * static_cast<double>(rgb.width())) * gsd_m;
    const double ly = (row + 0.5 - 0.5 * static_cast<double>(rgb.height())) * gsd_m;
    const double c = std::cos(pose.heading_rad);
    const double s = std::sin(pose.heading_rad);
    return {pose.x + c * lx - s * ly, pose.y + s * lx + c * ly};
  }

  /// Pixel window covering a world rectangle, or nullopt when the rectangle
  /// is not fully inside the footprint.
  std::optional<PixelRect> world_to_pixels(const WorldRect& r) const {
    const double c = std::cos(-pose.heading_rad);
    const double s = std::sin(-pose.heading_rad);
    const double half_w = 0.5 * static_cast<double>(rgb.width());
    const double half_h = 0.5 * static_cast<double>(rgb.height());
    double min_c = 1e300, max_c = -1e300, min_r = 1e300, max_r = -1e300;
    for (double wx : {r.x0, r.x1()}) {
      for (double wy : {r.y0, r.y1()}) {
        const double dx = wx - pose.x;
        const double dy = wy - pose.y;
        const double col = (c * dx - s * dy) / gsd_m + half_w;
        const double row = (s * dx + c * dy) / gsd_m + half_h;
        min_c = std::min(min_c, col);
        max_c = std::max(max_c, col);
        min_r = std::min(min_r, row);
        max_r = std::max(max_r, row);
      }
    }
    const double eps = 1e-6;
    if (min_c < -eps || min_r < -eps || max_c > 2 * half_w + eps || max_r > 2 * half_h + eps)
      return std::nullopt;
    const auto x0 = static_cast<std::size_t>(std::llround(std::max(0.0, min_c)));
    const auto y0 = static_cast<std::size_t>(std::llround(std::max(0.0, min_r)));
    const auto x1 = static_cast<std::size_t>(std::llround(max_c));
    const auto y1 = static_cast<std::size_t>(std::llround(max_r));
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    PixelRect px{x0, y0, std::min(x1, rgb.width()) - x0, std::min(y1, rgb.height()) - y0};
    return px;
  }
};

/// Provenance for a dataset: generator settings for synthetic data or the
/// ingest sources for recorded data.
struct Manifest {
  bool synthetic = false;
  std::optional<std::uint64_t> seed;
  std::string generator_version;
  StereoIntrinsics intrinsics;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> sources;
};

struct Dataset {
  std::vector<MultimodalFrame> frames;
  std::vector<BiomassSample> samples;
  std::vector<Plot> plots;
  Manifest manifest;

  const MultimodalFrame* find_frame(std::int64_t index) const noexcept {
    for (const auto& f : frames)
      if (f.frame_index == index) return &f;
    return nullptr;
  }
  const Plot* find_plot(int id) const noexcept {
    for (const auto& p : plots)
      if (p.id == id) return &p;
    return nullptr;
  }
};

}  // namespace agb
