#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace agb {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used only to turn stream labels into key material.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Mixes an integer lattice coordinate into a key. Used by the procedural
/// fields, which need random access rather than a sequential stream.
constexpr std::uint64_t hash_cell(std::uint64_t key, std::int64_t a, std::int64_t b) noexcept {
  std::uint64_t h = splitmix64(key ^ static_cast<std::uint64_t>(a));
  return splitmix64(h ^ (static_cast<std::uint64_t>(b) * 0xd6e8feb86659fd93ULL));
}

constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based random stream. Output i is a pure function of (key, i), so
/// sub-streams derived by label are independent of evaluation order and of
/// how work is split across threads.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view label) noexcept
      : key_(splitmix64(seed ^ hash_label(label))) {}

  RandomStream derive(std::string_view label) const noexcept { return {key_, label}; }

  RandomStream derive(std::string_view label, std::uint64_t index) const noexcept {
    RandomStream s{key_, label};
    s.key_ = splitmix64(s.key_ ^ splitmix64(index));
    return s;
  }

  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64() noexcept { return splitmix64(key_ + (counter_++) * kGoldenGamma); }

  /// Uniform in [0, 1).
  double uniform() noexcept { return to_unit(next_u64()); }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace agb
