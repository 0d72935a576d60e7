#pragma once

// Dataset directory layout:
//
//   <dir>/manifest.json
//   <dir>/frames/rgb_NNNNNN.ppm   one per frame index
//   <dir>/frames/disp_NNNNNN.dmap
//
// The manifest schema is documented in README.md ("Dataset manifest").

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agb/core/error.hpp"
#include "agb/core/types.hpp"
#include "agb/ingest/formats.hpp"
#include "agb/version.hpp"

namespace agb::io {

using nlohmann::json;

inline constexpr const char* kDatasetFormat = "agb-dataset/1";

inline json rect_json(const WorldRect& r) { return json::array({r.x0, r.y0, r.width, r.height}); }
inline json rect_json(const PixelRect& r) { return json::array({r.x0, r.y0, r.width, r.height}); }
inline json pose_json(const Pose& p) { return json::array({p.x, p.y, p.z, p.heading_rad}); }

inline WorldRect world_rect_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("rectangle must be [x0, y0, width, height]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}
inline PixelRect pixel_rect_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("pixel rectangle must be [x0, y0, width, height]");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>(), j[3].get<std::size_t>()};
}
inline Pose pose_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("pose must be [x, y, z, heading_rad]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json intrinsics_json(const StereoIntrinsics& i) {
  return {{"focal_px", i.focal_px},
          {"baseline_m", i.baseline_m},
          {"camera_height_m", i.camera_height_m},
          {"subpixel_step", i.subpixel_step}};
}
inline StereoIntrinsics intrinsics_from(const json& j) {
  StereoIntrinsics i;
  i.focal_px = j.value("focal_px", i.focal_px);
  i.baseline_m = j.value("baseline_m", i.baseline_m);
  i.camera_height_m = j.value("camera_height_m", i.camera_height_m);
  i.subpixel_step = j.value("subpixel_step", i.subpixel_step);
  i.validate();
  return i;
}

inline std::string frame_file(const char* stem, std::int64_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frames/%s_%06lld.%s", stem, static_cast<long long>(index), ext);
  return buf;
}

inline json plot_json(const Plot& p) {
  return {{"id", p.id},
          {"rect", rect_json(p.rect)},
          {"density_factor", p.density_factor},
          {"block", p.block},
          {"replication", p.replication}};
}

inline json sample_json(const BiomassSample& s) {
  json j = {{"id", s.id},
            {"plot_id", s.quadrat.plot_id},
            {"date_index", s.date_index},
            {"dry_agb_kg_per_m2", s.dry_agb_kg_per_m2},
            {"roi", rect_json(s.quadrat.roi)},
            {"side_m", s.quadrat.side_m},
            {"frame_index", s.frame_index}};
  if (s.frame_index >= 0) j["roi_px"] = rect_json(s.roi_px);
  return j;
}

/// Manifest for a dataset whose frames are written with the canonical names.
inline json dataset_manifest(const Dataset& ds) {
  json j;
  j["format"] = kDatasetFormat;
  j["build"] = kVersion;
  j["synthetic"] = ds.manifest.synthetic;
  j["seed"] = ds.manifest.seed ? json(*ds.manifest.seed) : json(nullptr);
  j["generator_version"] = ds.manifest.generator_version;
  j["intrinsics"] = intrinsics_json(ds.manifest.intrinsics);
  j["config"] = ds.manifest.config;
  j["sources"] = ds.manifest.sources;
  j["plots"] = json::array();
  for (const auto& p : ds.plots) j["plots"].push_back(plot_json(p));
  j["samples"] = json::array();
  for (const auto& s : ds.samples) j["samples"].push_back(sample_json(s));
  j["frames"] = json::array();
  for (const auto& f : ds.frames) {
    j["frames"].push_back({{"index", f.frame_index},
                           {"rgb", frame_file("rgb", f.frame_index, "ppm")},
                           {"disparity", frame_file("disp", f.frame_index, "dmap")},
                           {"pose", pose_json(f.pose)},
                           {"gsd_m", f.gsd_m},
                           {"date_index", f.date_index}});
  }
  return j;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "frames");
  for (const auto& f : ds.frames) {
    write_ppm(dir / frame_file("rgb", f.frame_index, "ppm"), f.rgb);
    write_dmap(dir / frame_file("disp", f.frame_index, "dmap"), f.disparity);
  }
  write_file(dir / "manifest.json", dataset_manifest(ds).dump(2) + "\n");
}

/// Links each sample to the frame that best contains its quadrat: same
/// sampling date, footprint containing the whole ROI, nearest centre, lowest
/// index on ties. Samples with no such frame stay unlinked (frame_index -1).
inline void link_samples(Dataset& ds) {
  for (auto& s : ds.samples) {
    s.frame_index = -1;
    s.roi_px = {};
    double best = 1e300;
    for (const auto& f : ds.frames) {
      if (f.date_index != s.date_index || f.rgb.empty()) continue;
      auto px = f.world_to_pixels(s.quadrat.roi);
      if (!px) continue;
      const double dx = f.pose.x - s.quadrat.roi.center_x();
      const double dy = f.pose.y - s.quadrat.roi.center_y();
      const double d2 = dx * dx + dy * dy;
      if (d2 < best - 1e-12) {
        best = d2;
        s.frame_index = f.frame_index;
        s.roi_px = *px;
      }
    }
  }
}

inline void parse_plots_and_samples(const json& m, Dataset& ds) {
  for (const auto& p : m.value("plots", json::array())) {
    Plot plot;
    plot.id = p.at("id").get<int>();
    plot.rect = world_rect_from(p.at("rect"));
    plot.density_factor = p.value("density_factor", 1.0);
    plot.block = p.value("block", 0);
    plot.replication = p.value("replication", 0);
    ds.plots.push_back(plot);
  }
  for (const auto& s : m.value("samples", json::array())) {
    BiomassSample b;
    b.id = s.at("id").get<int>();
    b.quadrat.plot_id = s.at("plot_id").get<int>();
    b.quadrat.roi = world_rect_from(s.at("roi"));
    b.quadrat.side_m = s.value("side_m", b.quadrat.roi.width);
    b.date_index = s.value("date_index", 0);
    b.dry_agb_kg_per_m2 = s.at("dry_agb_kg_per_m2").get<double>();
    ds.samples.push_back(b);
  }
}

inline void parse_provenance(const json& m, Dataset& ds) {
  ds.manifest.synthetic = m.value("synthetic", false);
  if (m.contains("seed") && !m["seed"].is_null()) ds.manifest.seed = m["seed"].get<std::uint64_t>();
  ds.manifest.generator_version = m.value("generator_version", std::string{});
  if (m.contains("intrinsics")) ds.manifest.intrinsics = intrinsics_from(m["intrinsics"]);
  if (m.contains("config")) ds.manifest.config = m["config"];
  if (m.contains("sources")) ds.manifest.sources = m["sources"].get<std::vector<std::string>>();
}

/// Pairs RGB and disparity frames listed in a manifest by frame index,
/// loads them from `frames_dir`, and attaches quadrat ROIs to frames.
/// Frame entries may list either modality separately; any index present in
/// only one modality is an orphan.
inline Dataset assemble_dataset(const std::filesystem::path& frames_dir, const json& manifest) {
  Dataset ds;
  parse_provenance(manifest, ds);
  parse_plots_and_samples(manifest, ds);

  struct Entry {
    std::optional<std::string> rgb;
    std::optional<std::string> disparity;
    std::optional<Pose> pose;
    std::optional<double> gsd;
    std::optional<int> date;
  };
  std::map<std::int64_t, Entry> entries;
  for (const auto& f : manifest.value("frames", json::array())) {
    Entry& e = entries[f.at("index").get<std::int64_t>()];
    if (f.contains("rgb") && !f["rgb"].is_null()) e.rgb = f["rgb"].get<std::string>();
    if (f.contains("disparity") && !f["disparity"].is_null()) e.disparity = f["disparity"].get<std::string>();
    if (f.contains("pose")) e.pose = pose_from(f["pose"]);
    if (f.contains("gsd_m")) e.gsd = f["gsd_m"].get<double>();
    if (f.contains("date_index")) e.date = f["date_index"].get<int>();
  }
  std::vector<std::int64_t> orphans;
  for (const auto& [idx, e] : entries)
    if (!e.rgb || !e.disparity) orphans.push_back(idx);
  if (!orphans.empty()) {
    std::string list;
    for (auto i : orphans) list += (list.empty() ? "" : ", ") + std::to_string(i);
    throw PairingError("unpaired frame indices: " + list, orphans);
  }
  const double default_gsd = manifest.value("gsd_m", 0.01);
  for (const auto& [idx, e] : entries) {
    MultimodalFrame f;
    f.frame_index = idx;
    f.rgb = read_ppm(frames_dir / *e.rgb);
    f.disparity = read_dmap<DisparityTag>(frames_dir / *e.disparity);
    f.pose = e.pose.value_or(Pose{0, 0, ds.manifest.intrinsics.camera_height_m, 0});
    f.gsd_m = e.gsd.value_or(default_gsd);
    f.date_index = e.date.value_or(0);
    ds.frames.push_back(std::move(f));
  }
  link_samples(ds);
  return ds;
}

inline json read_json(const std::filesystem::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what(), e.byte);
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  return assemble_dataset(dir, read_json(dir / "manifest.json"));
}

}  // namespace agb::io
