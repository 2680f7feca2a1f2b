#pragma once

#include <cstdint>

namespace lipbound {

/// SplitMix64 (Steele, Lea & Flood 2014). A 64-bit Weyl counter passed
/// through a fixed mixing function, so every port that implements the same
/// three shift-xor-multiply rounds reproduces the stream exactly.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in (0, 1]: ((x >> 11) + 1) · 2⁻⁵³.
  double uniform_open0() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal by the Box–Muller transform. Both outputs of a pair are
  /// used; the cached second value is returned on the following call.
  double normal() noexcept;

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Seed for the `index`-th independent stream derived from `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace lipbound
