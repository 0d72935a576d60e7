#pragma once

// Field-scale biomass map: each cell inside a plot takes the value of the
// nearest quadrat prediction in the same plot (nearest overall if the plot
// has none); cells outside every plot are invalid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "agb/core/error.hpp"
#include "agb/core/raster.hpp"
#include "agb/core/types.hpp"

namespace agb::eval {

struct MapPoint {
  double x = 0.0;
  double y = 0.0;
  std::int64_t plot_id = 0;
  double value = 0.0;  // kg/m^2
};

struct BiomassMap {
  MetricRaster raster;
  double origin_x = 0.0;  // world coordinates of the raster's (0, 0) corner
  double origin_y = 0.0;
  double cell_m = 0.0;
};

inline std::vector<MapPoint> map_points(const Dataset& ds, const std::vector<double>& predictions) {
  std::vector<MapPoint> pts;
  for (std::size_t i = 0; i < ds.samples.size() && i < predictions.size(); ++i) {
    if (std::isnan(predictions[i])) continue;
    const auto& q = ds.samples[i].quadrat;
    pts.push_back({q.roi.center_x(), q.roi.center_y(), q.plot_id, predictions[i]});
  }
  return pts;
}

inline BiomassMap biomass_map(const std::vector<Plot>& plots, const std::vector<MapPoint>& preds, double cell_m) {
  if (preds.empty()) throw DomainError("biomass map needs at least one prediction");
  if (plots.empty()) throw DomainError("biomass map needs at least one plot");
  if (!(cell_m > 0)) throw DomainError("map cell size must be positive");
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const auto& p : plots) {
    x0 = std::min(x0, p.rect.x0);
    y0 = std::min(y0, p.rect.y0);
    x1 = std::max(x1, p.rect.x1());
    y1 = std::max(y1, p.rect.y1());
  }
  const auto w = static_cast<std::size_t>(std::ceil((x1 - x0) / cell_m - 1e-9));
  const auto h = static_cast<std::size_t>(std::ceil((y1 - y0) / cell_m - 1e-9));
  check_dimensions(w, h);

  std::map<std::int64_t, std::vector<const MapPoint*>> by_plot;
  for (const auto& p : preds) by_plot[p.plot_id].push_back(&p);
  std::vector<const MapPoint*> all;
  for (const auto& p : preds) all.push_back(&p);

  BiomassMap out{MetricRaster(w, h, std::vector<float>(w * h, kInvalidMetric)), x0, y0, cell_m};
  for (const auto& plot : plots) {
    const auto it = by_plot.find(plot.id);
    const auto& cands = it != by_plot.end() ? it->second : all;
    const auto cx0 = static_cast<std::size_t>(std::max(0.0, std::floor((plot.rect.x0 - x0) / cell_m)));
    const auto cy0 = static_cast<std::size_t>(std::max(0.0, std::floor((plot.rect.y0 - y0) / cell_m)));
    for (std::size_t cy = cy0; cy < h; ++cy) {
      const double wy = y0 + (static_cast<double>(cy) + 0.5) * cell_m;
      if (wy >= plot.rect.y1()) break;
      if (wy < plot.rect.y0) continue;
      for (std::size_t cx = cx0; cx < w; ++cx) {
        const double wx = x0 + (static_cast<double>(cx) + 0.5) * cell_m;
        if (wx >= plot.rect.x1()) break;
        if (wx < plot.rect.x0) continue;
        const MapPoint* best = nullptr;
        double best_d = std::numeric_limits<double>::infinity();
        for (const MapPoint* c : cands) {
          const double d = (c->x - wx) * (c->x - wx) + (c->y - wy) * (c->y - wy);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        out.raster.at(cx, cy) = static_cast<float>(best->value);
      }
    }
  }
  return out;
}

/// Colour ramp from bare soil brown (0) through yellow to dense green
/// (y_max); invalid cells are white.
inline RgbImage render_map(const MetricRaster& m, double y_max) {
  RgbImage img(m.width(), m.height());
  static constexpr double stops[3][3] = {{120, 80, 40}, {230, 210, 60}, {20, 120, 30}};
  for (std::size_t y = 0; y < m.height(); ++y)
    for (std::size_t x = 0; x < m.width(); ++x) {
      std::uint8_t* px = img.pixel(x, y);
      const float v = m.at(x, y);
      if (std::isnan(v)) {
        px[0] = px[1] = px[2] = 255;
        continue;
      }
      const double t = std::clamp(static_cast<double>(v) / y_max, 0.0, 1.0) * 2.0;
      const int s = std::min(1, static_cast<int>(t));
      const double f = t - s;
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<std::uint8_t>(std::lround(stops[s][c] + f * (stops[s + 1][c] - stops[s][c])));
    }
  return img;
}

}  // namespace agb::eval
