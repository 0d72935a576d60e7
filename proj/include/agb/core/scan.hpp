#pragma once

#include <vector>

#include "agb/core/types.hpp"

namespace agb {

struct PolarPoint {
  float angle_rad = 0.0f;  // from nadir, positive toward the sensor's +y
  float range_m = 0.0f;
  friend bool operator==(const PolarPoint&, const PolarPoint&) = default;
};

/// One 2D LiDAR revolution. The scan plane is vertical and perpendicular to
/// the platform's travel axis (sensor +x).
struct PolarScan {
  Pose pose;
  double time_s = 0.0;
  std::vector<PolarPoint> points;
  double angular_res_deg = 0.1;
  double max_range_m = 12.0;

  friend bool operator==(const PolarScan& a, const PolarScan& b) {
    return a.pose == b.pose && a.time_s == b.time_s && a.points == b.points;
  }
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct PointCloud {
  std::vector<Point3> points;
};

}  // namespace agb
