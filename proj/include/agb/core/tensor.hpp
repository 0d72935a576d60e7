#pragma once

#include <cstddef>
#include <vector>

namespace agb {

/// Dense CHW tensor of doubles for one sample.
struct Tensor {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  double& at(std::size_t c, std::size_t y, std::size_t x) noexcept { return data[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data[(c * height + y) * width + x];
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace agb
