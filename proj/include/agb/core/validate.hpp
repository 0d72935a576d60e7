#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "agb/core/types.hpp"

namespace agb {

struct Violation {
  std::string subject;  // e.g. "sample 12", "frame 3"
  std::string message;
};

/// Checks every type invariant and cross-reference in a dataset. Pure; an
/// empty result means the dataset is well formed.
inline std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  auto add = [&out](std::string subject, std::string message) {
    out.push_back({std::move(subject), std::move(message)});
  };

  std::set<int> plot_ids;
  for (const auto& p : ds.plots) {
    const std::string subject = "plot " + std::to_string(p.id);
    if (!plot_ids.insert(p.id).second) add(subject, "duplicate plot id");
    if (!(p.rect.width > 0) || !(p.rect.height > 0)) add(subject, "plot rectangle must have positive extent");
    if (!(p.density_factor > 0)) add(subject, "density factor must be positive");
  }

  std::set<std::int64_t> frame_ids;
  for (const auto& f : ds.frames) {
    const std::string subject = "frame " + std::to_string(f.frame_index);
    if (f.frame_index < 0) add(subject, "frame index must be non-negative");
    if (!frame_ids.insert(f.frame_index).second) add(subject, "duplicate frame index");
    if (f.rgb.empty()) add(subject, "missing RGB image");
    if (f.disparity.empty()) add(subject, "missing disparity map");
    if (!f.rgb.empty() && !f.disparity.empty() &&
        (f.rgb.width() != f.disparity.width() || f.rgb.height() != f.disparity.height())) {
      add(subject, "dimension mismatch: rgb " + std::to_string(f.rgb.width()) + "x" +
                       std::to_string(f.rgb.height()) + " vs disparity " +
                       std::to_string(f.disparity.width()) + "x" +
                       std::to_string(f.disparity.height()));
    }
    for (float d : f.disparity.values()) {
      if (std::isfinite(d) && d < 0.0f) {
        add(subject, "negative disparity value");
        break;
      }
    }
    if (!(f.gsd_m > 0)) add(subject, "ground sampling distance must be positive");
    if (!(f.pose.z > 0)) add(subject, "sensor height must be positive");
  }

  std::set<int> sample_ids;
  for (const auto& s : ds.samples) {
    const std::string subject = "sample " + std::to_string(s.id);
    if (!sample_ids.insert(s.id).second) add(subject, "duplicate sample id");
    if (!std::isfinite(s.dry_agb_kg_per_m2) || s.dry_agb_kg_per_m2 < 0)
      add(subject, "dry AGB must be finite and non-negative");
    if (!(s.quadrat.side_m > 0)) add(subject, "quadrat side must be positive");
    if (std::abs(s.quadrat.roi.width - s.quadrat.side_m) > 1e-9 ||
        std::abs(s.quadrat.roi.height - s.quadrat.side_m) > 1e-9)
      add(subject, "quadrat ROI does not match its side length");
    if (s.date_index < 0) add(subject, "date index must be non-negative");
    if (!plot_ids.contains(s.quadrat.plot_id)) {
      add(subject, "references unknown plot " + std::to_string(s.quadrat.plot_id));
    }
    if (s.frame_index < 0) {
      add(subject, "ROI maps to no frame");
      continue;
    }
    const MultimodalFrame* f = ds.find_frame(s.frame_index);
    if (f == nullptr) {
      add(subject, "references unknown frame " + std::to_string(s.frame_index));
    } else if (s.roi_px.area() == 0 || !s.roi_px.fits(f->rgb.width(), f->rgb.height())) {
      add(subject, "pixel ROI outside frame " + std::to_string(s.frame_index));
    }
  }

  if (ds.manifest.synthetic && !ds.manifest.seed) add("manifest", "synthetic dataset without a recorded seed");
  return out;
}

}  // namespace agb
