#pragma once

// Procedural stand-in for a cover-crop field trial: randomized complete block
// layout, smooth per-plot canopies, destructively sampled quadrats with
// allometric ground truth, and top-down RGB/disparity and 2D LiDAR renders.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agb/core/error.hpp"
#include "agb/core/parallel.hpp"
#include "agb/core/rng.hpp"
#include "agb/core/scan.hpp"
#include "agb/core/types.hpp"
#include "agb/stereo.hpp"
#include "agb/version.hpp"

namespace agb::synth {

inline constexpr double kStereoClearanceM = 0.85;

/// AGB = k * d^alpha * c * h. k is pinned by the calibration anchor: a
/// full-density canopy 0.5 m tall at 90 % cover carries 0.8 kg/m^2.
struct AllometricModel {
  double k = 0.8 / (0.9 * 0.5);
  double alpha = 0.35;
};

inline double allometric_biomass(double mean_height_m, double cover_fraction, double density_factor,
                                 const AllometricModel& m = {}) {
  if (!std::isfinite(mean_height_m) || mean_height_m < 0 || mean_height_m > stereo::kMaxPlantHeightM)
    throw DomainError("mean height must lie in [0, 0.65] m");
  if (!std::isfinite(cover_fraction) || cover_fraction < 0 || cover_fraction > 1)
    throw DomainError("cover fraction must lie in [0, 1]");
  if (!std::isfinite(density_factor) || density_factor <= 0)
    throw DomainError("density factor must be positive");
  return m.k * std::pow(density_factor, m.alpha) * cover_fraction * mean_height_m;
}

struct FieldConfig {
  int n_plots = 27;
  double plot_w_m = 20.0;
  double plot_h_m = 12.0;
  std::vector<double> density_factors{0.25, 0.75, 1.5};
  int replications = 3;
  int quadrats_per_plot = 5;
  int n_dates = 3;
  double noise_sd = 0.02;
  std::uint64_t seed = 7;

  double quadrat_side_m = 0.5;
  double plot_gap_m = 1.0;
  double edge_margin_m = 0.5;
  int plots_per_row = 9;
  double microsite_amplitude = 0.10;
  double clump_amplitude = 0.15;

  // Rendering.
  StereoIntrinsics intrinsics;
  int render_px = 128;
  double footprint_m = 1.0;
  int frames_per_sample = 1;
  double frame_step_m = 0.035;  // along-track spacing between repeated captures
  double dropout_rate = 0.0;    // stereo no-match rate (exposure effects)

  // LiDAR.
  int lidar_scans_per_plot = 3;

  AllometricModel allometry;

  void validate() const {
    const int levels = static_cast<int>(density_factors.size());
    if (n_plots < 1 || levels < 1 || replications < 1)
      throw DomainError("field needs at least one plot, density factor and replication");
    if (n_plots % (levels * replications) != 0)
      throw DomainError("n_plots must be a multiple of |density_factors| x replications");
    for (double d : density_factors)
      if (!(d > 0)) throw DomainError("density factors must be positive");
    if (quadrats_per_plot < 0 || n_dates < 1) throw DomainError("invalid quadrat or date count");
    if (!(plot_w_m > 0) || !(plot_h_m > 0)) throw DomainError("plot size must be positive");
    if (!(noise_sd >= 0)) throw DomainError("noise_sd must be non-negative");
    if (!(quadrat_side_m > 0)) throw DomainError("quadrat side must be positive");
    if (render_px < 2 || !(footprint_m > quadrat_side_m))
      throw DomainError("frame footprint must be larger than a quadrat");
    if (frames_per_sample < 1) throw DomainError("frames_per_sample must be at least 1");
    if (!(dropout_rate >= 0 && dropout_rate < 1)) throw DomainError("dropout rate must lie in [0, 1)");
    if (plots_per_row < 1) throw DomainError("plots_per_row must be positive");
    intrinsics.validate();
  }

  std::size_t total_samples() const noexcept {
    return static_cast<std::size_t>(n_plots) * static_cast<std::size_t>(quadrats_per_plot);
  }
};

inline nlohmann::json to_json(const FieldConfig& c) {
  return {
      {"n_plots", c.n_plots},
      {"plot_w_m", c.plot_w_m},
      {"plot_h_m", c.plot_h_m},
      {"density_factors", c.density_factors},
      {"replications", c.replications},
      {"quadrats_per_plot", c.quadrats_per_plot},
      {"n_dates", c.n_dates},
      {"noise_sd", c.noise_sd},
      {"seed", c.seed},
      {"quadrat_side_m", c.quadrat_side_m},
      {"plot_gap_m", c.plot_gap_m},
      {"edge_margin_m", c.edge_margin_m},
      {"plots_per_row", c.plots_per_row},
      {"microsite_amplitude", c.microsite_amplitude},
      {"clump_amplitude", c.clump_amplitude},
      {"render_px", c.render_px},
      {"footprint_m", c.footprint_m},
      {"frames_per_sample", c.frames_per_sample},
      {"frame_step_m", c.frame_step_m},
      {"dropout_rate", c.dropout_rate},
      {"lidar_scans_per_plot", c.lidar_scans_per_plot},
      {"allometry", {{"k", c.allometry.k}, {"alpha", c.allometry.alpha}}},
  };
}

// ---------------------------------------------------------------------------
// Procedural fields

/// Sum of smooth compact radial bumps centred on a jittered lattice with
/// spacing `cell`. Output in [-1, 1], C1-continuous.
inline double bump_field(std::uint64_t key, double x, double y, double cell) noexcept {
  const auto ix = static_cast<std::int64_t>(std::floor(x / cell));
  const auto iy = static_cast<std::int64_t>(std::floor(y / cell));
  double sum = 0.0;
  for (std::int64_t j = iy - 1; j <= iy + 1; ++j) {
    for (std::int64_t i = ix - 1; i <= ix + 1; ++i) {
      const std::uint64_t h = hash_cell(key, i, j);
      const double cx = (static_cast<double>(i) + to_unit(splitmix64(h))) * cell;
      const double cy = (static_cast<double>(j) + to_unit(splitmix64(h ^ 1))) * cell;
      const double w = 2.0 * to_unit(splitmix64(h ^ 2)) - 1.0;
      const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (cell * cell);
      if (r2 < 1.0) sum += w * (1.0 - r2) * (1.0 - r2);
    }
  }
  return std::clamp(sum, -1.0, 1.0);
}

struct PlotCanopy {
  int plot_id = 0;
  WorldRect rect;
  double density_factor = 1.0;
  double stand_density_per_m2 = 0.0;
  double mature_height_m = 0.0;  // before date scaling and microsite modulation
  double mature_cover = 0.0;
  double microsite_amplitude = 0.0;
  double clump_amplitude = 0.0;
  std::uint64_t key = 0;
};

struct CanopyPoint {
  bool vegetation = false;
  double height_m = 0.0;  // 0 on bare soil
};

/// Canopy model for every plot and sampling date. Queries are pure functions
/// of position and date.
struct FieldState {
  std::vector<PlotCanopy> plots;
  std::vector<double> height_growth{1.0};  // per date multiplier
  std::vector<double> cover_growth{1.0};
  double max_plant_height_m = stereo::kMaxPlantHeightM;
  std::uint64_t vegetation_key = 0x5eed;
  double vegetation_cell_m = 0.01;

  static constexpr double kMicrositeCellM = 2.0;
  static constexpr double kClumpCellM = 0.12;

  int n_dates() const noexcept { return static_cast<int>(height_growth.size()); }

  const PlotCanopy* plot_at(double x, double y) const noexcept {
    for (const auto& p : plots)
      if (p.rect.contains(x, y)) return &p;
    return nullptr;
  }

  /// Local probability that a point is vegetated, c(x, y) in [0, 1].
  double cover(const PlotCanopy& p, double x, double y, int date) const noexcept {
    const double micro = 1.0 + p.microsite_amplitude * bump_field(p.key ^ 0xc0, x, y, kMicrositeCellM);
    return std::clamp(p.mature_cover * cover_growth[static_cast<std::size_t>(date)] * micro, 0.0, 1.0);
  }

  /// Canopy height if the point is vegetated, h(x, y) in [0, max_plant_height].
  double vegetated_height(const PlotCanopy& p, double x, double y, int date) const noexcept {
    const double micro = 1.0 + p.microsite_amplitude * bump_field(p.key ^ 0xc0, x, y, kMicrositeCellM);
    const double clump = 1.0 + p.clump_amplitude * bump_field(p.key ^ 0xc1, x, y, kClumpCellM);
    const double h = p.mature_height_m * height_growth[static_cast<std::size_t>(date)] * micro * clump;
    return std::clamp(h, 0.0, max_plant_height_m);
  }

  CanopyPoint at(double x, double y, int date) const noexcept {
    const PlotCanopy* p = plot_at(x, y);
    if (p == nullptr) return {};
    const double c = cover(*p, x, y, date);
    const auto ix = static_cast<std::int64_t>(std::floor(x / vegetation_cell_m));
    const auto iy = static_cast<std::int64_t>(std::floor(y / vegetation_cell_m));
    const double u = to_unit(hash_cell(vegetation_key, ix, iy));
    if (!(u < c)) return {};
    return {true, vegetated_height(*p, x, y, date)};
  }

  double height(double x, double y, int date) const noexcept { return at(x, y, date).height_m; }

  /// Upper bound on canopy height anywhere in the field on a date.
  double height_bound(int date) const noexcept {
    double best = 0.0;
    for (const auto& p : plots) {
      const double h = p.mature_height_m * height_growth[static_cast<std::size_t>(date)] *
                       (1.0 + p.microsite_amplitude) * (1.0 + p.clump_amplitude);
      best = std::max(best, h);
    }
    return std::min(best, max_plant_height_m);
  }

  /// Single-plot field with constant height and cover (no modulation).
  static FieldState uniform(double height_m, double cover_fraction, WorldRect extent,
                            double density_factor = 1.0) {
    FieldState f;
    PlotCanopy p;
    p.plot_id = 0;
    p.rect = extent;
    p.density_factor = density_factor;
    p.mature_height_m = height_m;
    p.mature_cover = cover_fraction;
    f.plots.push_back(p);
    return f;
  }
};

/// Cover fraction and mean vegetated height over a rectangle, sampled on a
/// regular grid of `samples_per_side`^2 points.
struct RoiTruth {
  double cover = 0.0;
  double mean_height_m = 0.0;
};

inline RoiTruth roi_truth(const FieldState& field, const WorldRect& roi, int date, int samples_per_side = 100) {
  std::size_t veg = 0;
  double hsum = 0.0;
  const double dx = roi.width / samples_per_side;
  const double dy = roi.height / samples_per_side;
  for (int j = 0; j < samples_per_side; ++j) {
    for (int i = 0; i < samples_per_side; ++i) {
      const CanopyPoint pt = field.at(roi.x0 + (i + 0.5) * dx, roi.y0 + (j + 0.5) * dy, date);
      if (pt.vegetation) {
        ++veg;
        hsum += pt.height_m;
      }
    }
  }
  const double n = static_cast<double>(samples_per_side) * samples_per_side;
  RoiTruth t;
  t.cover = static_cast<double>(veg) / n;
  t.mean_height_m = veg > 0 ? hsum / static_cast<double>(veg) : 0.0;
  return t;
}

// ---------------------------------------------------------------------------
// Rendering

struct RenderRequest {
  Pose pose;                 // z = camera height above the soil plane
  std::size_t resolution = 128;
  double gsd_m = 1.0 / 128;  // meters per pixel
  int date_index = 0;
  std::int64_t frame_index = 0;
  double dropout_rate = 0.0;
  std::uint64_t texture_key = 0;
};

/// Orthographic top-down render of the field under the camera.
/// disparity = f * B / (camera_height - h), snapped to the subpixel step.
inline MultimodalFrame render_frame(const FieldState& field, const RenderRequest& req,
                                    const StereoIntrinsics& intr) {
  intr.validate();
  const std::size_t n = req.resolution;
  MultimodalFrame frame;
  frame.rgb = RgbImage(n, n);
  frame.disparity = DisparityMap(n, n, kInvalidDisparity);
  frame.frame_index = req.frame_index;
  frame.pose = req.pose;
  frame.gsd_m = req.gsd_m;
  frame.date_index = req.date_index;

  std::vector<CanopyPoint> canopy(n * n);
  double tallest = 0.0;
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t col = 0; col < n; ++col) {
      auto [wx, wy] = frame.pixel_to_world(static_cast<double>(col), static_cast<double>(row));
      canopy[row * n + col] = field.at(wx, wy, req.date_index);
      tallest = std::max(tallest, canopy[row * n + col].height_m);
    }
  }
  if (req.pose.z - tallest < kStereoClearanceM - 1e-9)
    throw GeometryError("camera at " + std::to_string(req.pose.z) + " m leaves less than 0.85 m clearance above " +
                        std::to_string(tallest) + " m canopy");

  const double fb = intr.focal_baseline();
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t col = 0; col < n; ++col) {
      const CanopyPoint& pt = canopy[row * n + col];
      const std::uint64_t h = hash_cell(req.texture_key, static_cast<std::int64_t>(col),
                                        static_cast<std::int64_t>(row));
      const double texture = 0.85 + 0.3 * to_unit(splitmix64(h));
      double r, g, b;
      if (pt.vegetation) {
        const double shade = 0.8 + 0.4 * pt.height_m / field.max_plant_height_m;
        r = 52 * shade;
        g = 132 * shade;
        b = 42 * shade;
      } else {
        r = 128;
        g = 102;
        b = 76;
      }
      double channel[3] = {r, g, b};
      std::uint8_t* px = frame.rgb.pixel(col, row);
      for (int c = 0; c < 3; ++c) {
        const double jitter = 8.0 * (to_unit(splitmix64(h ^ (0x10u + c))) - 0.5);
        px[c] = static_cast<std::uint8_t>(std::clamp(std::lround(channel[c] * texture + jitter), 0L, 255L));
      }
      if (req.dropout_rate > 0 && to_unit(splitmix64(h ^ 0x99)) < req.dropout_rate) continue;
      const double d = fb / (req.pose.z - pt.height_m);
      frame.disparity.at(col, row) =
          static_cast<float>(std::round(d / intr.subpixel_step) * intr.subpixel_step);
    }
  }
  return frame;
}

// ---------------------------------------------------------------------------
// LiDAR

struct SweepConfig {
  std::vector<Pose> stations;  // z = LiDAR mount height (1.45 m on the platform)
  double angular_res_deg = 0.1;
  double angle_min_deg = -45.0;
  double angle_max_deg = 45.0;
  double max_range_m = 12.0;
  double range_quantum_m = 0.001;
  double march_step_m = 0.004;
  double scan_period_s = 0.1;
  int date_index = 0;
};

inline double cast_ray(const FieldState& field, const Pose& pose, double angle_rad, double max_range,
                       double step, int date, double canopy_bound) {
  const double st = std::sin(angle_rad);
  const double ct = std::cos(angle_rad);
  if (ct <= 1e-9) return -1.0;
  const double dx = -std::sin(pose.heading_rad) * st;
  const double dy = std::cos(pose.heading_rad) * st;
  const double dz = -ct;
  auto gap = [&](double t) {
    const double x = pose.x + dx * t;
    const double y = pose.y + dy * t;
    return pose.z + dz * t - field.height(x, y, date);
  };
  double t = std::max(0.0, (pose.z - canopy_bound) / ct - step);
  if (gap(t) <= 0.0) return t > 0 ? t : -1.0;
  const double t_ground = pose.z / ct;  // the ray reaches the soil plane here
  const double t_end = std::min(t_ground, max_range);
  while (t < t_end) {
    const double prev = t;
    t = std::min(t + step, t_end);
    if (gap(t) <= 0.0) {
      double lo = prev, hi = t;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) <= 0.0) hi = mid; else lo = mid;
      }
      return hi;
    }
  }
  return t_ground <= max_range ? t_ground : -1.0;
}

/// Ray-casts each station's scan plane against the canopy height field.
/// Ranges are quantized to range_quantum_m; beams with no return inside
/// max_range_m are dropped.
inline std::vector<PolarScan> simulate_lidar_sweep(const FieldState& field, const SweepConfig& cfg,
                                                   unsigned threads = 1) {
  if (!(cfg.angular_res_deg > 0) || !(cfg.angle_max_deg >= cfg.angle_min_deg))
    throw DomainError("invalid LiDAR angular configuration");
  const auto n_beams = static_cast<std::size_t>(
      std::floor((cfg.angle_max_deg - cfg.angle_min_deg) / cfg.angular_res_deg + 1e-9)) + 1;
  const double bound = field.height_bound(cfg.date_index);
  std::vector<PolarScan> scans(cfg.stations.size());
  parallel_for(cfg.stations.size(), threads, [&](std::size_t s) {
    PolarScan scan;
    scan.pose = cfg.stations[s];
    scan.time_s = static_cast<double>(s) * cfg.scan_period_s;
    scan.angular_res_deg = cfg.angular_res_deg;
    scan.max_range_m = cfg.max_range_m;
    for (std::size_t i = 0; i < n_beams; ++i) {
      const double deg = cfg.angle_min_deg + static_cast<double>(i) * cfg.angular_res_deg;
      const double theta = deg * std::numbers::pi / 180.0;
      const double r = cast_ray(field, scan.pose, theta, cfg.max_range_m, cfg.march_step_m,
                                cfg.date_index, bound);
      if (r <= 0.0) continue;
      const double q = std::round(r / cfg.range_quantum_m) * cfg.range_quantum_m;
      if (q <= 0.0 || q > cfg.max_range_m) continue;
      scan.points.push_back({static_cast<float>(theta), static_cast<float>(q)});
    }
    scans[s] = std::move(scan);
  });
  return scans;
}

// ---------------------------------------------------------------------------
// Field generation

inline std::vector<double> growth_multipliers(int n_dates, double first) {
  std::vector<double> m(static_cast<std::size_t>(n_dates), 1.0);
  for (int i = 0; i < n_dates && n_dates > 1; ++i)
    m[static_cast<std::size_t>(i)] = first + (1.0 - first) * i / (n_dates - 1);
  return m;
}

/// Mature canopy height and cover as functions of planting density.
inline double mature_height_for(double density_factor) { return 0.28 + 0.09 * density_factor; }
inline double mature_cover_for(double density_factor) { return std::min(0.95, 0.45 + 0.35 * density_factor); }

struct GeneratedField {
  FieldState field;
  Dataset dataset;
};

/// Lays out the trial, places quadrats, computes ground truth and renders
/// one or more frames per quadrat.
inline GeneratedField generate_field(const FieldConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const RandomStream root(cfg.seed, "synthfield");
  const int levels = static_cast<int>(cfg.density_factors.size());

  GeneratedField out;
  FieldState& field = out.field;
  Dataset& ds = out.dataset;
  field.height_growth = growth_multipliers(cfg.n_dates, 0.55);
  field.cover_growth = growth_multipliers(cfg.n_dates, 0.7);
  field.vegetation_key = root.derive("vegetation").key();

  // Randomized complete blocks: consecutive groups of `levels` plots, each a
  // fresh permutation of the density factors.
  const int n_blocks = cfg.n_plots / levels;
  for (int b = 0; b < n_blocks; ++b) {
    std::vector<int> order(static_cast<std::size_t>(levels));
    for (int i = 0; i < levels; ++i) order[static_cast<std::size_t>(i)] = i;
    RandomStream rs = root.derive("rcbd", static_cast<std::uint64_t>(b));
    rs.shuffle(std::span<int>(order));
    for (int k = 0; k < levels; ++k) {
      const int id = b * levels + k;
      const int col = id % cfg.plots_per_row;
      const int row = id / cfg.plots_per_row;
      Plot plot;
      plot.id = id;
      plot.rect = {col * (cfg.plot_w_m + cfg.plot_gap_m), row * (cfg.plot_h_m + cfg.plot_gap_m), cfg.plot_w_m,
                   cfg.plot_h_m};
      plot.density_factor = cfg.density_factors[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      plot.block = b;
      plot.replication = b % cfg.replications;
      ds.plots.push_back(plot);

      RandomStream ps = root.derive("plot", static_cast<std::uint64_t>(id));
      PlotCanopy c;
      c.plot_id = id;
      c.rect = plot.rect;
      c.density_factor = plot.density_factor;
      c.stand_density_per_m2 = 180.0 * plot.density_factor;
      c.mature_height_m = mature_height_for(plot.density_factor) * ps.uniform(0.92, 1.08);
      c.mature_cover = mature_cover_for(plot.density_factor) * ps.uniform(0.95, 1.05);
      c.microsite_amplitude = cfg.microsite_amplitude;
      c.clump_amplitude = cfg.clump_amplitude;
      c.key = ps.next_u64();
      field.plots.push_back(c);
    }
  }

  // Quadrats: rejection sampling inside each plot's inset, no overlaps.
  const double side = cfg.quadrat_side_m;
  const double margin = std::max(cfg.edge_margin_m, 0.5 * (cfg.footprint_m - side));
  int sample_id = 0;
  for (const Plot& plot : ds.plots) {
    const double free_w = plot.rect.width - 2 * margin - side;
    const double free_h = plot.rect.height - 2 * margin - side;
    if (cfg.quadrats_per_plot > 0 && (free_w < 0 || free_h < 0))
      throw PlacementError("plot " + std::to_string(plot.id) + " is too small for a quadrat and its margin");
    RandomStream qs = root.derive("quadrats", static_cast<std::uint64_t>(plot.id));
    std::vector<WorldRect> placed;
    for (int q = 0; q < cfg.quadrats_per_plot; ++q) {
      bool ok = false;
      for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
        // Snap to the render grid so quadrats land on whole pixels.
        const double grid = cfg.footprint_m / cfg.render_px;
        const double qx = plot.rect.x0 + margin + std::floor(qs.uniform(0.0, free_w) / grid) * grid;
        const double qy = plot.rect.y0 + margin + std::floor(qs.uniform(0.0, free_h) / grid) * grid;
        const WorldRect r{qx, qy, side, side};
        ok = std::none_of(placed.begin(), placed.end(), [&](const WorldRect& o) { return o.overlaps(r); });
        if (ok) placed.push_back(r);
      }
      if (!ok)
        throw PlacementError("cannot place " + std::to_string(cfg.quadrats_per_plot) +
                             " non-overlapping quadrats in plot " + std::to_string(plot.id));
      BiomassSample s;
      s.id = sample_id++;
      s.quadrat = {plot.id, placed.back(), side};
      s.date_index = q % cfg.n_dates;
      ds.samples.push_back(s);
    }
  }

  // Ground truth.
  parallel_for(ds.samples.size(), threads, [&](std::size_t i) {
    BiomassSample& s = ds.samples[i];
    const Plot* plot = ds.find_plot(s.quadrat.plot_id);
    const RoiTruth t = roi_truth(field, s.quadrat.roi, s.date_index);
    RandomStream ns = root.derive("noise", static_cast<std::uint64_t>(s.id));
    const double agb = allometric_biomass(t.mean_height_m, t.cover, plot->density_factor, cfg.allometry) +
                       cfg.noise_sd * ns.normal();
    s.dry_agb_kg_per_m2 = std::max(0.0, agb);
  });

  // Frames: the first capture of each quadrat is centred on it, repeats
  // step along the travel axis while keeping the quadrat in view.
  const auto fps = static_cast<std::size_t>(cfg.frames_per_sample);
  ds.frames.resize(ds.samples.size() * fps);
  const double gsd = cfg.footprint_m / cfg.render_px;
  parallel_for(ds.frames.size(), threads, [&](std::size_t k) {
    const BiomassSample& s = ds.samples[k / fps];
    const std::size_t rep = k % fps;
    const double half_slack = 0.5 * (cfg.footprint_m - side);
    double offset = static_cast<double>(rep) * cfg.frame_step_m;
    if (half_slack > 0) offset = std::fmod(offset, half_slack);
    RenderRequest req;
    req.pose = {s.quadrat.roi.center_x() + offset, s.quadrat.roi.center_y(), cfg.intrinsics.camera_height_m, 0.0};
    req.resolution = static_cast<std::size_t>(cfg.render_px);
    req.gsd_m = gsd;
    req.date_index = s.date_index;
    req.frame_index = static_cast<std::int64_t>(k);
    req.dropout_rate = cfg.dropout_rate;
    req.texture_key = root.derive("texture", k).key();
    ds.frames[k] = render_frame(field, req, cfg.intrinsics);
  });
  for (BiomassSample& s : ds.samples) {
    s.frame_index = static_cast<std::int64_t>(static_cast<std::size_t>(s.id) * fps);
    s.roi_px = ds.frames[static_cast<std::size_t>(s.frame_index)].world_to_pixels(s.quadrat.roi).value();
  }

  ds.manifest.synthetic = true;
  ds.manifest.seed = cfg.seed;
  ds.manifest.generator_version = kGeneratorVersion;
  ds.manifest.intrinsics = cfg.intrinsics;
  ds.manifest.config = to_json(cfg);
  return out;
}

/// One LiDAR sweep per plot along its centre line on the last sampling date.
inline std::vector<std::vector<PolarScan>> plot_sweeps(const FieldConfig& cfg, const FieldState& field,
                                                       unsigned threads = 1) {
  std::vector<std::vector<PolarScan>> sweeps(field.plots.size());
  parallel_for(field.plots.size(), threads, [&](std::size_t i) {
    const PlotCanopy& p = field.plots[i];
    SweepConfig sc;
    sc.date_index = field.n_dates() - 1;
    for (int k = 0; k < cfg.lidar_scans_per_plot; ++k)
      sc.stations.push_back({p.rect.center_x() + 0.25 * k, p.rect.center_y(), 1.45, 0.0});
    sweeps[i] = simulate_lidar_sweep(field, sc);
  });
  return sweeps;
}

// ---------------------------------------------------------------------------
// Growth gradient

/// Canopy at one growth stage t in [0, 1]: height grows linearly to 0.5 m,
/// cover grows linearly until it saturates at 0.9 then stays flat.
struct GrowthStage {
  double t = 0.0;
  double height_m = 0.0;
  double cover = 0.0;
  double agb_kg_per_m2 = 0.0;
  FieldState field;
};

/// Growth stage at which cover saturates: the allometric model gives
/// 0.25 kg/m^2 there for a full-density stand.
inline double cover_saturation_stage(const AllometricModel& m = {}) { return 0.25 / (m.k * 0.9 * 0.5); }

inline std::vector<GrowthStage> growth_series(int steps, WorldRect extent, const AllometricModel& m = {}) {
  if (steps < 2) throw DomainError("growth series needs at least two steps");
  const double t_sat = cover_saturation_stage(m);
  std::vector<GrowthStage> out;
  for (int i = 0; i < steps; ++i) {
    GrowthStage g;
    g.t = static_cast<double>(i) / (steps - 1);
    g.height_m = 0.5 * g.t;
    g.cover = 0.9 * std::min(1.0, g.t / t_sat);
    g.agb_kg_per_m2 = allometric_biomass(g.height_m, g.cover, 1.0, m);
    g.field = FieldState::uniform(g.height_m, g.cover, extent);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace agb::synth
