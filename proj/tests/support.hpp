#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "agb/synthfield.hpp"

namespace agb::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "agb") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Three plots, one per density factor, two quadrats each.
inline synth::FieldConfig small_config(std::uint64_t seed = 11) {
  synth::FieldConfig c;
  c.n_plots = 3;
  c.replications = 1;
  c.quadrats_per_plot = 2;
  c.n_dates = 2;
  c.seed = seed;
  c.lidar_scans_per_plot = 1;
  return c;
}

}  // namespace agb::testing
