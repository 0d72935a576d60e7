#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "agb/core/error.hpp"
#include "agb/core/raster.hpp"
#include "agb/core/tensor.hpp"
#include "agb/core/types.hpp"
#include "agb/stereo.hpp"

namespace agb::features {

/// Cover-crop pixel density plus canopy-height statistics over one quadrat.
struct FeatureVec {
  double cc_pixel_density = 0.0;
  double height_mean_m = 0.0;
  double height_p90_m = 0.0;
  double height_max_m = 0.0;
  double valid_fraction = 0.0;

  static constexpr std::size_t kDims = 5;
  std::array<double, kDims> values() const noexcept {
    return {cc_pixel_density, height_mean_m, height_p90_m, height_max_m, valid_fraction};
  }
  static constexpr std::array<const char*, kDims> names() noexcept {
    return {"cc_pixel_density", "height_mean_m", "height_p90_m", "height_max_m", "valid_fraction"};
  }
  friend bool operator==(const FeatureVec&, const FeatureVec&) = default;
};

// --- segmentation ------------------------------------------------------------

/// ExG = 2g - r - b on chromatic coordinates; 0 for black pixels.
inline double excess_green(const std::uint8_t* px) noexcept {
  const double sum = static_cast<double>(px[0]) + px[1] + px[2];
  if (sum <= 0.0) return 0.0;
  return (2.0 * px[1] - px[0] - px[2]) / sum;
}

inline constexpr int kExgBins = 256;
inline constexpr double kExgMin = -1.0;
inline constexpr double kExgMax = 2.0;
/// Fixed threshold used when the ExG histogram has no second mode.
inline constexpr double kExgFloor = 0.1;
/// Minimum gap between Otsu class means for the split to count as bimodal.
inline constexpr double kMinClassSeparation = 0.15;

inline int exg_bin(double exg) noexcept {
  const int b = static_cast<int>(std::floor((exg - kExgMin) / (kExgMax - kExgMin) * kExgBins));
  return std::clamp(b, 0, kExgBins - 1);
}

struct OtsuResult {
  int last_background_bin = -1;  // bins <= this are background
  double separation = 0.0;       // difference of class means, ExG units
};

inline OtsuResult otsu(const std::array<double, kExgBins>& hist) {
  double total = 0.0, weighted = 0.0;
  for (int i = 0; i < kExgBins; ++i) {
    total += hist[static_cast<std::size_t>(i)];
    weighted += i * hist[static_cast<std::size_t>(i)];
  }
  OtsuResult best;
  double best_var = -1.0;
  double w0 = 0.0, s0 = 0.0;
  for (int k = 0; k < kExgBins - 1; ++k) {
    w0 += hist[static_cast<std::size_t>(k)];
    s0 += k * hist[static_cast<std::size_t>(k)];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double mu0 = s0 / w0;
    const double mu1 = (weighted - s0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_var) {
      best_var = between;
      best.last_background_bin = k;
      best.separation = (mu1 - mu0) * (kExgMax - kExgMin) / kExgBins;
    }
  }
  return best;
}

/// Vegetation mask: ExG above an Otsu threshold. Histograms without a
/// second mode (bare soil or closed canopy) fall back to ExG > kExgFloor.
inline Mask segment_vegetation(const RgbImage& rgb) {
  Mask m{rgb.width(), rgb.height(), std::vector<std::uint8_t>(rgb.width() * rgb.height(), 0)};
  std::vector<double> exg(m.data.size());
  std::array<double, kExgBins> hist{};
  for (std::size_t y = 0; y < rgb.height(); ++y)
    for (std::size_t x = 0; x < rgb.width(); ++x) {
      const double e = excess_green(rgb.pixel(x, y));
      exg[y * rgb.width() + x] = e;
      hist[static_cast<std::size_t>(exg_bin(e))] += 1.0;
    }
  const OtsuResult t = otsu(hist);
  const bool bimodal = t.last_background_bin >= 0 && t.separation >= kMinClassSeparation;
  for (std::size_t i = 0; i < exg.size(); ++i) {
    const bool veg = bimodal ? exg_bin(exg[i]) > t.last_background_bin : exg[i] > kExgFloor;
    m.data[i] = veg ? 1 : 0;
  }
  return m;
}

inline void check_roi(const PixelRect& roi, std::size_t w, std::size_t h) {
  if (roi.area() == 0) throw DomainError("empty ROI");
  if (!roi.fits(w, h)) throw DomainError("ROI outside raster bounds");
}

inline double pixel_density(const Mask& mask, const PixelRect& roi) {
  check_roi(roi, mask.width, mask.height);
  std::size_t veg = 0;
  for (std::size_t y = roi.y0; y < roi.y0 + roi.height; ++y)
    for (std::size_t x = roi.x0; x < roi.x0 + roi.width; ++x) veg += mask.at(x, y);
  return static_cast<double>(veg) / static_cast<double>(roi.area());
}

/// Nearest-rank percentile: the ceil(p * n)-th smallest value (1-based).
inline double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

struct HeightStats {
  double mean = 0.0;
  double p90 = 0.0;
  double max = 0.0;
  double valid_fraction = 0.0;
};

/// Statistics over valid, vegetation-masked pixels of the ROI. With no such
/// pixels every field is 0.
inline HeightStats height_stats(const HeightMap& heights, const Mask& mask, const PixelRect& roi) {
  check_roi(roi, heights.width(), heights.height());
  if (mask.width != heights.width() || mask.height != heights.height())
    throw DomainError("mask and height map dimensions differ");
  std::vector<double> vals;
  std::size_t valid = 0;
  for (std::size_t y = roi.y0; y < roi.y0 + roi.height; ++y)
    for (std::size_t x = roi.x0; x < roi.x0 + roi.width; ++x) {
      const float h = heights.at(x, y);
      if (std::isnan(h)) continue;
      ++valid;
      if (mask.at(x, y)) vals.push_back(h);
    }
  HeightStats s;
  if (vals.empty()) return s;
  double sum = 0.0;
  for (double v : vals) sum += v;
  s.mean = sum / static_cast<double>(vals.size());
  s.max = *std::max_element(vals.begin(), vals.end());
  s.p90 = nearest_rank(vals, 0.9);
  s.valid_fraction = static_cast<double>(valid) / static_cast<double>(roi.area());
  return s;
}

// --- resampling ----------------------------------------------------------------

inline void check_downsample(std::size_t sw, std::size_t sh, std::size_t tw, std::size_t th) {
  if (tw < 1 || th < 1) throw DomainError("downsample target must be at least 1x1");
  if (tw > sw || th > sh) throw DomainError("downsample target exceeds source (no upsampling)");
}

inline std::size_t block_begin(std::size_t i, std::size_t src, std::size_t dst) { return i * src / dst; }

/// Box-filter area average.
inline RgbImage downsample(const RgbImage& src, std::size_t tw, std::size_t th) {
  check_downsample(src.width(), src.height(), tw, th);
  RgbImage out(tw, th);
  for (std::size_t oy = 0; oy < th; ++oy) {
    const std::size_t y0 = block_begin(oy, src.height(), th), y1 = block_begin(oy + 1, src.height(), th);
    for (std::size_t ox = 0; ox < tw; ++ox) {
      const std::size_t x0 = block_begin(ox, src.width(), tw), x1 = block_begin(ox + 1, src.width(), tw);
      std::array<std::uint64_t, 3> acc{};
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) acc[static_cast<std::size_t>(c)] += src.pixel(x, y)[c];
      const std::uint64_t n = (y1 - y0) * (x1 - x0);
      for (int c = 0; c < 3; ++c)
        out.pixel(ox, oy)[c] = static_cast<std::uint8_t>((acc[static_cast<std::size_t>(c)] * 2 + n) / (2 * n));
    }
  }
  return out;
}

/// Invalid-aware median per block; an all-NaN block stays NaN. Even counts
/// take the mean of the two middle values.
template <typename Tag>
Raster<Tag> downsample(const Raster<Tag>& src, std::size_t tw, std::size_t th) {
  check_downsample(src.width(), src.height(), tw, th);
  Raster<Tag> out(tw, th, kInvalidMetric);
  std::vector<float> block;
  for (std::size_t oy = 0; oy < th; ++oy) {
    const std::size_t y0 = block_begin(oy, src.height(), th), y1 = block_begin(oy + 1, src.height(), th);
    for (std::size_t ox = 0; ox < tw; ++ox) {
      const std::size_t x0 = block_begin(ox, src.width(), tw), x1 = block_begin(ox + 1, src.width(), tw);
      block.clear();
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x)
          if (!std::isnan(src.at(x, y))) block.push_back(src.at(x, y));
      if (block.empty()) continue;
      std::sort(block.begin(), block.end());
      const std::size_t n = block.size();
      out.at(ox, oy) = n % 2 ? block[n / 2]
                             : static_cast<float>((static_cast<double>(block[n / 2 - 1]) + block[n / 2]) / 2.0);
    }
  }
  return out;
}

inline RgbImage crop(const RgbImage& src, const PixelRect& roi) {
  check_roi(roi, src.width(), src.height());
  RgbImage out(roi.width, roi.height);
  for (std::size_t y = 0; y < roi.height; ++y)
    for (std::size_t x = 0; x < roi.width; ++x)
      std::copy_n(src.pixel(roi.x0 + x, roi.y0 + y), 3, out.pixel(x, y));
  return out;
}

template <typename Tag>
Raster<Tag> crop(const Raster<Tag>& src, const PixelRect& roi) {
  check_roi(roi, src.width(), src.height());
  Raster<Tag> out(roi.width, roi.height);
  for (std::size_t y = 0; y < roi.height; ++y)
    for (std::size_t x = 0; x < roi.width; ++x) out.at(x, y) = src.at(roi.x0 + x, roi.y0 + y);
  return out;
}

// --- composition -------------------------------------------------------------------

inline HeightMap frame_heights(const MultimodalFrame& frame, const StereoIntrinsics& intr) {
  return stereo::depth_to_height(stereo::disparity_to_depth(frame.disparity, intr), intr.camera_height_m);
}

inline FeatureVec feature_vector(const MultimodalFrame& frame, const PixelRect& roi, const StereoIntrinsics& intr) {
  check_roi(roi, frame.rgb.width(), frame.rgb.height());
  const Mask mask = segment_vegetation(frame.rgb);
  const HeightStats hs = height_stats(frame_heights(frame, intr), mask, roi);
  FeatureVec f;
  f.cc_pixel_density = pixel_density(mask, roi);
  f.height_mean_m = hs.mean;
  f.height_p90_m = hs.p90;
  f.height_max_m = hs.max;
  f.valid_fraction = hs.valid_fraction;
  return f;
}

/// Early-fusion input for the CNN: RGB scaled to [0, 1] plus the metric
/// height map divided by the maximum plant height (invalid -> 0), cropped to
/// the ROI and resampled to size x size.
inline Tensor fusion_tensor(const MultimodalFrame& frame, const PixelRect& roi, const StereoIntrinsics& intr,
                            std::size_t size) {
  const RgbImage rgb = downsample(crop(frame.rgb, roi), size, size);
  const HeightMap h = downsample(crop(frame_heights(frame, intr), roi), size, size);
  Tensor t(4, size, size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      for (std::size_t c = 0; c < 3; ++c) t.at(c, y, x) = rgb.pixel(x, y)[c] / 255.0;
      const float hv = h.at(x, y);
      t.at(3, y, x) = std::isnan(hv) ? 0.0 : hv / stereo::kMaxPlantHeightM;
    }
  return t;
}

}  // namespace agb::features
