#pragma once

// Frame-sequence ("video") workflow: a recording is a directory of per-frame
// files in capture order. Each sequence is classified by container, the
// selected frames are extracted, and RGB/disparity frames are paired into a
// dataset.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "agb/core/error.hpp"
#include "agb/core/types.hpp"
#include "agb/ingest/dataset_io.hpp"
#include "agb/ingest/formats.hpp"

namespace agb::io {

enum class SequenceKind { Rgb, Disparity };

inline const char* to_string(SequenceKind k) { return k == SequenceKind::Rgb ? "RGB" : "DISPARITY"; }

inline SequenceKind sequence_kind_from(const std::string& s) {
  if (s == "RGB" || s == "rgb") return SequenceKind::Rgb;
  if (s == "DISPARITY" || s == "disparity") return SequenceKind::Disparity;
  throw DataError("unknown sequence kind '" + s + "' (expected RGB or DISPARITY)");
}

/// Evenly spaced indices over [0, total), first and last included.
inline std::vector<std::size_t> even_selection(std::size_t total, std::size_t count) {
  if (count == 0 || total == 0) return {};
  count = std::min(count, total);
  if (count == 1) return {0};
  std::vector<std::size_t> sel(count);
  for (std::size_t i = 0; i < count; ++i)
    sel[i] = static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(total - 1) /
                                                   static_cast<double>(count - 1)));
  return sel;
}

struct SequenceManifestEntry {
  std::filesystem::path path;
  SequenceKind kind = SequenceKind::Rgb;
  double fps = 15.0;
  double duration_s = 10.0;
  std::vector<std::size_t> selection = even_selection(150, 70);
  std::int64_t frame_offset = 0;

  std::size_t expected_frames() const noexcept {
    return static_cast<std::size_t>(std::llround(fps * duration_s));
  }

  void validate() const {
    if (!(fps > 0) || !(duration_s > 0)) throw DataError("sequence fps and duration must be positive");
    for (std::size_t i = 1; i < selection.size(); ++i)
      if (selection[i] <= selection[i - 1]) throw DataError("selection indices must be strictly increasing");
  }
};

inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("sequence directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

/// Declared kind, confirmed against the first frame's container magic.
inline SequenceKind classify_sequence(const SequenceManifestEntry& entry) {
  const auto files = list_frames(entry.path);
  if (files.empty()) throw ClassificationError("no frames in " + entry.path.string());
  const Container c = sniff_file(files.front());
  const bool ok = (entry.kind == SequenceKind::Rgb && c == Container::Ppm) ||
                  (entry.kind == SequenceKind::Disparity && c == Container::Dmap);
  if (!ok)
    throw ClassificationError(entry.path.string() + " is declared " + to_string(entry.kind) +
                              " but its first frame has a different container");
  return entry.kind;
}

struct SequenceFrame {
  std::size_t index = 0;
  std::variant<RgbImage, DisparityMap> data;
};

/// Reads every frame file in order and keeps those whose index is in the
/// selection list. The sequence must hold exactly fps * duration frames.
inline std::vector<SequenceFrame> extract_frames(const SequenceManifestEntry& entry) {
  entry.validate();
  const SequenceKind kind = classify_sequence(entry);
  const auto files = list_frames(entry.path);
  if (files.size() != entry.expected_frames())
    throw DataError(entry.path.string() + " holds " + std::to_string(files.size()) + " frames, expected " +
                    std::to_string(entry.expected_frames()) + " (fps x duration)");
  for (std::size_t idx : entry.selection)
    if (idx >= files.size())
      throw RangeError("selected frame " + std::to_string(idx) + " is out of range for a " +
                       std::to_string(files.size()) + "-frame sequence");
  std::vector<SequenceFrame> out;
  out.reserve(entry.selection.size());
  std::size_t next = 0;
  for (std::size_t current = 0; current < files.size() && next < entry.selection.size(); ++current) {
    if (current != entry.selection[next]) continue;
    SequenceFrame f;
    f.index = current;
    if (kind == SequenceKind::Rgb)
      f.data = read_ppm(files[current]);
    else
      f.data = read_dmap<DisparityTag>(files[current]);
    out.push_back(std::move(f));
    ++next;
  }
  return out;
}

inline SequenceManifestEntry sequence_entry_from(const nlohmann::json& j, const std::filesystem::path& base) {
  SequenceManifestEntry e;
  e.path = base / j.at("path").get<std::string>();
  e.kind = sequence_kind_from(j.at("kind").get<std::string>());
  e.fps = j.value("fps", e.fps);
  e.duration_s = j.value("duration_s", e.duration_s);
  if (j.contains("selection"))
    e.selection = j["selection"].get<std::vector<std::size_t>>();
  else
    e.selection = even_selection(e.expected_frames(), 70);
  e.frame_offset = j.value("frame_offset", std::int64_t{0});
  return e;
}

/// Builds a dataset from an acquisition manifest listing frame sequences.
/// Extracted frames get index frame_offset + position in their sequence and
/// are paired across modalities by that index.
inline Dataset ingest_sequences(const nlohmann::json& manifest, const std::filesystem::path& base) {
  Dataset ds;
  parse_provenance(manifest, ds);
  parse_plots_and_samples(manifest, ds);

  std::map<std::int64_t, RgbImage> rgb;
  std::map<std::int64_t, DisparityMap> disp;
  for (const auto& sj : manifest.at("sequences")) {
    const SequenceManifestEntry entry = sequence_entry_from(sj, base);
    ds.manifest.sources.push_back(sj.at("path").get<std::string>());
    for (auto& f : extract_frames(entry)) {
      const std::int64_t idx = entry.frame_offset + static_cast<std::int64_t>(f.index);
      if (auto* img = std::get_if<RgbImage>(&f.data))
        rgb[idx] = std::move(*img);
      else
        disp[idx] = std::move(std::get<DisparityMap>(f.data));
    }
  }
  std::vector<std::int64_t> orphans;
  for (const auto& [idx, _] : rgb)
    if (!disp.contains(idx)) orphans.push_back(idx);
  for (const auto& [idx, _] : disp)
    if (!rgb.contains(idx)) orphans.push_back(idx);
  std::sort(orphans.begin(), orphans.end());
  if (!orphans.empty()) {
    std::string list;
    for (auto i : orphans) list += (list.empty() ? "" : ", ") + std::to_string(i);
    throw PairingError("unpaired frame indices: " + list, orphans);
  }

  std::map<std::int64_t, nlohmann::json> poses;
  for (const auto& p : manifest.value("poses", nlohmann::json::array()))
    poses[p.at("index").get<std::int64_t>()] = p;
  const double default_gsd = manifest.value("gsd_m", 0.01);
  for (auto& [idx, img] : rgb) {
    MultimodalFrame f;
    f.frame_index = idx;
    f.rgb = std::move(img);
    f.disparity = std::move(disp[idx]);
    f.pose = {0, 0, ds.manifest.intrinsics.camera_height_m, 0};
    f.gsd_m = default_gsd;
    if (auto it = poses.find(idx); it != poses.end()) {
      if (it->second.contains("pose")) f.pose = pose_from(it->second["pose"]);
      f.gsd_m = it->second.value("gsd_m", default_gsd);
      f.date_index = it->second.value("date_index", 0);
    }
    ds.frames.push_back(std::move(f));
  }
  link_samples(ds);
  return ds;
}

/// Entry point for the ingest command: sequence manifests go through the
/// frame-extraction workflow, dataset manifests through direct pairing.
inline Dataset ingest_manifest(const std::filesystem::path& manifest_path) {
  const nlohmann::json m = read_json(manifest_path);
  const auto base = manifest_path.parent_path();
  if (m.contains("sequences")) return ingest_sequences(m, base);
  return assemble_dataset(base, m);
}

}  // namespace agb::io
