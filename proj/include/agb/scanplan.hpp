#pragma once

// Kinematics-only analysis of the 2-DoF Cartesian sensor platform: forward
// kinematics, working volume, serpentine sweep planning, LiDAR point-cloud
// assembly and camera frame overlap.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "agb/core/error.hpp"
#include "agb/core/parallel.hpp"
#include "agb/core/scan.hpp"
#include "agb/core/types.hpp"
#include "agb/stereo.hpp"

namespace agb::scan {

inline constexpr double kLidarMountM = 1.45;
inline constexpr double kCameraMountM = 1.5;
inline constexpr double kDefaultVfovDeg = 55.0;

struct CartesianPlatform {
  // Frame envelope.
  static constexpr double kFrameHeightM = 0.90;
  static constexpr double kFrameWidthM = 1.10;
  static constexpr double kFrameDepthM = 0.85;

  double x_travel_m = kFrameWidthM;
  double y_travel_m = kFrameDepthM;
  double mount_height_m = kLidarMountM;
  Pose base{};  // sensor pose at q = (0, 0); z is replaced by mount_height_m

  void validate() const {
    if (!(x_travel_m > 0) || !(y_travel_m > 0)) throw DomainError("platform travels must be positive");
    if (!(mount_height_m > 0)) throw DomainError("mount height must be positive");
  }
};

/// Sensor pose after displacing the carriages by (qx, qy).
inline Pose fk_cartesian(const CartesianPlatform& p, double qx, double qy) {
  p.validate();
  if (!(qx >= 0 && qx <= p.x_travel_m) || !(qy >= 0 && qy <= p.y_travel_m))
    throw RangeError("joint displacement outside the travel limits");
  return {p.base.x + qx, p.base.y + qy, p.mount_height_m, p.base.heading_rad};
}

struct WorkingVolume {
  WorldRect sensor_positions;  // horizontal extent of reachable sensor positions
  double sensor_z_m = 0.0;
  WorldRect ground_footprint;  // ground area seen at the canopy top
  double clearance_m = 0.0;
};

/// Checks that the tallest admissible canopy leaves `clearance_m` below the
/// sensor and returns the reachable box plus the ground area the sensor can
/// see across its scan plane (half-angle `half_fov_deg`, along the y axis).
inline WorkingVolume working_volume(const CartesianPlatform& p, double clearance_m = 0.85,
                                    double max_plant_m = stereo::kMaxPlantHeightM, double half_fov_deg = 45.0) {
  p.validate();
  if (!(max_plant_m >= 0) || !(clearance_m >= 0)) throw DomainError("clearance and plant height must be non-negative");
  const double clearance = p.mount_height_m - max_plant_m;
  if (clearance < clearance_m - 1e-9)
    throw GeometryError("mount height " + std::to_string(p.mount_height_m) + " m leaves " +
                        std::to_string(clearance) + " m above a " + std::to_string(max_plant_m) +
                        " m canopy; at least " + std::to_string(clearance_m) + " m is required");
  WorkingVolume v;
  v.sensor_positions = {p.base.x, p.base.y, p.x_travel_m, p.y_travel_m};
  v.sensor_z_m = p.mount_height_m;
  v.clearance_m = clearance;
  const double reach = clearance * std::tan(half_fov_deg * std::numbers::pi / 180.0);
  v.ground_footprint = {p.base.x, p.base.y - reach, p.x_travel_m, p.y_travel_m + 2 * reach};
  return v;
}

struct Waypoint {
  double qx = 0.0;
  double qy = 0.0;
  int pass = 0;
};

/// Stations 0, s, 2s, ... along one axis, with the last spacing shrunk so the
/// far limit is included. n = ceil(travel / step) + 1.
inline std::vector<double> axis_stations(double travel, double step) {
  const auto n = static_cast<std::size_t>(std::ceil(travel / step - 1e-9)) + 1;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = travel * static_cast<double>(i) / static_cast<double>(n - 1);
  return s;
}

/// Serpentine coverage: passes along x at y lines no more than step_m apart,
/// alternating direction; consecutive waypoints move one axis at a time.
inline std::vector<Waypoint> plan_sweep(const CartesianPlatform& p, double step_m) {
  p.validate();
  if (!(step_m > 0) || step_m > std::min(p.x_travel_m, p.y_travel_m) + 1e-12)
    throw DomainError("sweep step must lie in (0, min travel]");
  const auto xs = axis_stations(p.x_travel_m, step_m);
  const auto ys = axis_stations(p.y_travel_m, step_m);
  std::vector<Waypoint> path;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double x = i % 2 == 0 ? xs[k] : xs[xs.size() - 1 - k];
      path.push_back({x, ys[i], static_cast<int>(i)});
    }
  }
  return path;
}

inline std::size_t pass_count(const std::vector<Waypoint>& path) {
  return path.empty() ? 0 : static_cast<std::size_t>(path.back().pass) + 1;
}

/// Scan-plane point (0, r sin a, -r cos a) in the sensor frame, rotated by
/// the heading and translated by the pose.
inline Point3 polar_to_world(const Pose& pose, double angle_rad, double range_m) {
  const double lateral = range_m * std::sin(angle_rad);
  return {pose.x - std::sin(pose.heading_rad) * lateral, pose.y + std::cos(pose.heading_rad) * lateral,
          pose.z - range_m * std::cos(angle_rad)};
}

inline PointCloud assemble_point_cloud(const std::vector<PolarScan>& scans, unsigned threads = 1) {
  std::vector<std::size_t> offset(scans.size() + 1, 0);
  for (std::size_t i = 0; i < scans.size(); ++i) offset[i + 1] = offset[i] + scans[i].points.size();
  PointCloud cloud;
  cloud.points.resize(offset.back());
  parallel_for(scans.size(), threads, [&](std::size_t s) {
    const auto& scan = scans[s];
    for (std::size_t k = 0; k < scan.points.size(); ++k)
      cloud.points[offset[s] + k] = polar_to_world(scan.pose, scan.points[k].angle_rad, scan.points[k].range_m);
  });
  return cloud;
}

inline void write_xyz(std::ostream& os, const PointCloud& cloud) {
  char buf[96];
  for (const auto& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.4f %.4f %.4f\n", p.x, p.y, p.z);
    os << buf;
  }
}

/// Forward overlap between consecutive frames of a camera moving at
/// speed_mps and capturing at fps. The along-track footprint at canopy top is
/// L = 2 (camera - canopy) tan(vfov / 2).
inline double overlap_fraction(double speed_mps, double fps, double camera_height_m, double canopy_height_m,
                               double vfov_deg = kDefaultVfovDeg) {
  if (!(speed_mps >= 0) || !(fps > 0) || !(vfov_deg > 0 && vfov_deg < 180) || !(canopy_height_m >= 0))
    throw DomainError("overlap needs speed >= 0, fps > 0, canopy >= 0 and 0 < vfov < 180");
  if (!(camera_height_m > canopy_height_m)) throw GeometryError("camera must be above the canopy");
  const double footprint = 2.0 * (camera_height_m - canopy_height_m) * std::tan(vfov_deg * std::numbers::pi / 360.0);
  return std::max(0.0, 1.0 - speed_mps / (fps * footprint));
}

struct PlaneFit {
  double a = 0.0, b = 0.0, c = 0.0;  // z = a x + b y + c
  double rms_residual = 0.0;          // perpendicular distance
};

/// Least-squares plane through a cloud (normal equations, 3x3 solve).
inline PlaneFit fit_plane(const PointCloud& cloud) {
  if (cloud.points.size() < 3) throw DomainError("plane fit needs at least three points");
  double mx = 0, my = 0, mz = 0;
  for (const auto& p : cloud.points) {
    mx += p.x;
    my += p.y;
    mz += p.z;
  }
  const auto n = static_cast<double>(cloud.points.size());
  mx /= n;
  my /= n;
  mz /= n;
  double sxx = 0, sxy = 0, syy = 0, sxz = 0, syz = 0;
  for (const auto& p : cloud.points) {
    const double dx = p.x - mx, dy = p.y - my, dz = p.z - mz;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
    sxz += dx * dz;
    syz += dy * dz;
  }
  PlaneFit f;
  const double det = sxx * syy - sxy * sxy;
  if (std::abs(det) > 1e-12 * std::max(1.0, sxx * syy)) {
    f.a = (sxz * syy - syz * sxy) / det;
    f.b = (syz * sxx - sxz * sxy) / det;
  } else if (syy > 0) {
    f.b = syz / syy;  // degenerate in x (a single scan line)
  } else if (sxx > 0) {
    f.a = sxz / sxx;
  }
  f.c = mz - f.a * mx - f.b * my;
  double ss = 0;
  for (const auto& p : cloud.points) {
    const double r = p.z - (f.a * p.x + f.b * p.y + f.c);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / n / (1.0 + f.a * f.a + f.b * f.b));
  return f;
}

}  // namespace agb::scan
