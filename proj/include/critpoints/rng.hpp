#pragma once

// Seeding and portable variate generation.
//
// std::mt19937_64 is fully specified by the standard, but the std
// distributions are not, so uniforms and normals are derived here from raw
// engine output. A given seed produces the same stream on every platform.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace critpoints {

/// SplitMix64 finaliser (Steele, Lea, Flood 2014 constants).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-job seed: split(master, n, trial) = mix(mix(mix(master) ^ n) ^ trial).
///
/// Depends only on the job key, never on scheduling, so results do not
/// change with the thread count. split(master, 0, 0) is reserved for the
/// reference sample of an experiment.
constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t n,
                                   std::uint64_t trial) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ n) ^ trial);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  /// Standard normal by Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace critpoints
