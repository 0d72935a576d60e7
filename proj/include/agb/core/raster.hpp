#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "agb/core/error.hpp"

namespace agb {

/// Axis-aligned pixel window: columns [x0, x0 + width), rows [y0, y0 + height).
struct PixelRect {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t area() const noexcept { return width * height; }
  bool fits(std::size_t w, std::size_t h) const noexcept {
    return width <= w && height <= h && x0 <= w - width && y0 <= h - height;
  }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

inline constexpr std::size_t kMaxRasterPixels = std::size_t{1} << 30;

inline void check_dimensions(std::size_t width, std::size_t height) {
  if (width < 1 || height < 1) throw DomainError("raster dimensions must be at least 1x1");
  if (width > kMaxRasterPixels / height)
    throw DomainError("raster dimensions " + std::to_string(width) + "x" +
                      std::to_string(height) + " exceed the supported pixel count");
}

/// Row-major 8-bit RGB image.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::size_t width, std::size_t height)
      : width_(width), height_(height) {
    check_dimensions(width, height);
    data_.assign(width * height * 3, 0);
  }
  RgbImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dimensions(width, height);
    if (data_.size() != width * height * 3)
      throw DomainError("RGB payload length does not match width*height*3");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t* pixel(std::size_t x, std::size_t y) noexcept { return &data_[(y * width_ + x) * 3]; }
  const std::uint8_t* pixel(std::size_t x, std::size_t y) const noexcept {
    return &data_[(y * width_ + x) * 3];
  }

  std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  std::span<std::uint8_t> bytes() noexcept { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Row-major single-channel float raster. The tag keeps disparity, depth and
/// height rasters from being mixed up at call sites.
template <typename Tag>
class Raster {
 public:
  Raster() = default;
  Raster(std::size_t width, std::size_t height, float fill = 0.0f)
      : width_(width), height_(height) {
    check_dimensions(width, height);
    data_.assign(width * height, fill);
  }
  Raster(std::size_t width, std::size_t height, std::vector<float> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dimensions(width, height);
    if (data_.size() != width * height)
      throw DomainError("raster payload length does not match width*height");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }
  float at(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  /// Bitwise comparison so NaN pixels compare equal to themselves.
  friend bool operator==(const Raster& a, const Raster& b) {
    if (a.width_ != b.width_ || a.height_ != b.height_) return false;
    for (std::size_t i = 0; i < a.data_.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(a.data_[i]) != std::bit_cast<std::uint32_t>(b.data_[i]))
        return false;
    }
    return true;
  }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> data_;
};

struct DisparityTag {};
struct DepthTag {};
struct HeightTag {};
struct MetricTag {};

/// Disparity in pixels; 0 marks a pixel with no stereo match.
using DisparityMap = Raster<DisparityTag>;
/// Depth along the optical axis in meters; NaN marks invalid pixels.
using DepthMap = Raster<DepthTag>;
/// Canopy height above the soil plane in meters; NaN marks invalid pixels.
using HeightMap = Raster<HeightTag>;
/// Generic metric raster (e.g. a kg/m^2 biomass map); NaN marks no data.
using MetricRaster = Raster<MetricTag>;

inline constexpr float kInvalidMetric = std::numeric_limits<float>::quiet_NaN();
inline constexpr float kInvalidDisparity = 0.0f;

/// Binary vegetation mask, row-major, 1 = vegetation.
struct Mask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(std::size_t x, std::size_t y) const noexcept { return data[y * width + x]; }
};

}  // namespace agb
