#pragma once

// On-disk containers.
//
//   PPM   binary P6: "P6\n<w> <h>\n255\n" + w*h*3 bytes, row-major RGB.
//   DMAP  "DMAP", u8 version (1), u32 width, u32 height, then width*height
//         IEEE 754 binary32, row-major. NaN marks an invalid metric pixel;
//         disparity rasters use 0 for no-match.
//   LSCN  "LSCN", u8 version (1), u32 scan count; per scan five binary64
//         (x, y, z, heading_rad, time_s), u32 point count, then point count
//         (angle_rad, range_m) binary32 pairs.
//
// All integers and floats are little-endian. Writers are canonical; readers
// reject bad magic, truncation, oversized dimensions and trailing bytes.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "agb/core/bytes.hpp"
#include "agb/core/error.hpp"
#include "agb/core/raster.hpp"
#include "agb/core/scan.hpp"

namespace agb::io {

inline constexpr std::uint8_t kDmapVersion = 1;
inline constexpr std::uint8_t kLscnVersion = 1;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

// --- PPM -------------------------------------------------------------------

inline std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  auto b = img.bytes();
  out.append(reinterpret_cast<const char*>(b.data()), b.size());
  return out;
}

namespace detail {

inline void skip_ppm_space(std::string_view s, std::size_t& pos) {
  for (;;) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos < s.size() && s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
      continue;
    }
    return;
  }
}

inline std::uint64_t read_ppm_uint(std::string_view s, std::size_t& pos, const char* what) {
  skip_ppm_space(s, pos);
  const std::size_t start = pos;
  std::uint64_t v = 0;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
    v = v * 10 + static_cast<std::uint64_t>(s[pos] - '0');
    if (v > (std::uint64_t{1} << 32)) throw FormatError(std::string("PPM ") + what + " too large", start);
    ++pos;
  }
  if (pos == start) throw FormatError(std::string("PPM header missing ") + what, start);
  return v;
}

}  // namespace detail

inline RgbImage decode_ppm(std::string_view s) {
  if (s.size() < 2 || s.substr(0, 2) != "P6") throw FormatError("bad magic for PPM (expected P6)", 0);
  std::size_t pos = 2;
  const auto w = detail::read_ppm_uint(s, pos, "width");
  const auto h = detail::read_ppm_uint(s, pos, "height");
  const std::size_t maxval_at = pos;
  const auto maxval = detail::read_ppm_uint(s, pos, "maxval");
  if (maxval != 255) throw FormatError("PPM maxval must be 255", maxval_at);
  if (pos >= s.size() || !std::isspace(static_cast<unsigned char>(s[pos])))
    throw FormatError("PPM header must end with a single whitespace byte", pos);
  ++pos;
  if (w == 0 || h == 0 || w > kMaxRasterPixels / h) throw FormatError("PPM dimensions out of range", 3);
  const std::size_t payload = static_cast<std::size_t>(w * h * 3);
  if (s.size() - pos < payload) throw FormatError("truncated PPM payload", s.size());
  if (s.size() - pos > payload)
    throw FormatError("PPM has " + std::to_string(s.size() - pos - payload) + " trailing bytes", pos + payload);
  std::vector<std::uint8_t> data(reinterpret_cast<const std::uint8_t*>(s.data() + pos),
                                 reinterpret_cast<const std::uint8_t*>(s.data() + pos + payload));
  return RgbImage(static_cast<std::size_t>(w), static_cast<std::size_t>(h), std::move(data));
}

inline RgbImage read_ppm(const std::filesystem::path& p) { return decode_ppm(read_file(p)); }
inline void write_ppm(const std::filesystem::path& p, const RgbImage& img) { write_file(p, encode_ppm(img)); }

// --- DMAP ------------------------------------------------------------------

template <typename Tag>
std::string encode_dmap(const Raster<Tag>& r) {
  ByteWriter w;
  w.raw("DMAP");
  w.u8(kDmapVersion);
  w.u32(static_cast<std::uint32_t>(r.width()));
  w.u32(static_cast<std::uint32_t>(r.height()));
  for (float v : r.values()) w.f32(v);
  return w.take();
}

template <typename Tag>
Raster<Tag> decode_dmap(std::string_view s) {
  ByteReader r(s);
  r.expect_magic("DMAP", "DMAP");
  const std::size_t version_at = r.offset();
  if (r.u8("DMAP version") != kDmapVersion) throw FormatError("unsupported DMAP version", version_at);
  const std::size_t dims_at = r.offset();
  const std::uint32_t w = r.u32("DMAP width");
  const std::uint32_t h = r.u32("DMAP height");
  if (w == 0 || h == 0 || std::uint64_t{w} * h > kMaxRasterPixels)
    throw FormatError("DMAP dimensions out of range", dims_at);
  const std::size_t n = std::size_t{w} * h;
  if (r.remaining() != n * 4)
    throw FormatError("DMAP declares " + std::to_string(n * 4) + " payload bytes but " +
                          std::to_string(r.remaining()) + " follow the header",
                      r.offset());
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = r.f32("DMAP payload");
  return Raster<Tag>(w, h, std::move(data));
}

template <typename Tag>
Raster<Tag> read_dmap(const std::filesystem::path& p) {
  return decode_dmap<Tag>(read_file(p));
}
template <typename Tag>
void write_dmap(const std::filesystem::path& p, const Raster<Tag>& r) {
  write_file(p, encode_dmap(r));
}

// --- LSCN ------------------------------------------------------------------

inline std::string encode_lscn(const std::vector<PolarScan>& scans) {
  ByteWriter w;
  w.raw("LSCN");
  w.u8(kLscnVersion);
  w.u32(static_cast<std::uint32_t>(scans.size()));
  for (const auto& s : scans) {
    w.f64(s.pose.x);
    w.f64(s.pose.y);
    w.f64(s.pose.z);
    w.f64(s.pose.heading_rad);
    w.f64(s.time_s);
    w.u32(static_cast<std::uint32_t>(s.points.size()));
    for (const auto& p : s.points) {
      w.f32(p.angle_rad);
      w.f32(p.range_m);
    }
  }
  return w.take();
}

inline std::vector<PolarScan> decode_lscn(std::string_view s) {
  ByteReader r(s);
  r.expect_magic("LSCN", "LSCN");
  const std::size_t version_at = r.offset();
  if (r.u8("LSCN version") != kLscnVersion) throw FormatError("unsupported LSCN version", version_at);
  const std::size_t count_at = r.offset();
  const std::uint32_t count = r.u32("LSCN scan count");
  // Each scan needs at least its 44-byte header.
  if (std::uint64_t{count} * 44 > r.remaining())
    throw FormatError("LSCN scan count exceeds file size", count_at);
  std::vector<PolarScan> scans(count);
  for (auto& scan : scans) {
    scan.pose.x = r.f64("LSCN pose");
    scan.pose.y = r.f64("LSCN pose");
    scan.pose.z = r.f64("LSCN pose");
    scan.pose.heading_rad = r.f64("LSCN pose");
    scan.time_s = r.f64("LSCN pose");
    const std::size_t npts_at = r.offset();
    const std::uint32_t npts = r.u32("LSCN point count");
    if (std::uint64_t{npts} * 8 > r.remaining())
      throw FormatError("LSCN point count exceeds remaining payload", npts_at);
    scan.points.resize(npts);
    for (auto& p : scan.points) {
      p.angle_rad = r.f32("LSCN point");
      p.range_m = r.f32("LSCN point");
    }
  }
  r.expect_end("LSCN");
  return scans;
}

inline std::vector<PolarScan> read_lscn(const std::filesystem::path& p) { return decode_lscn(read_file(p)); }
inline void write_lscn(const std::filesystem::path& p, const std::vector<PolarScan>& scans) {
  write_file(p, encode_lscn(scans));
}

/// Identifies a container by its leading magic bytes.
enum class Container { Unknown, Ppm, Dmap, Lscn, Model };

inline Container sniff(std::string_view head) {
  if (head.size() >= 2 && head.substr(0, 2) == "P6") return Container::Ppm;
  if (head.size() >= 4 && head.substr(0, 4) == "DMAP") return Container::Dmap;
  if (head.size() >= 4 && head.substr(0, 4) == "LSCN") return Container::Lscn;
  if (head.size() >= 4 && head.substr(0, 4) == "CFMD") return Container::Model;
  return Container::Unknown;
}

inline Container sniff_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  char buf[4] = {};
  in.read(buf, 4);
  return sniff(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
}

}  // namespace agb::io
