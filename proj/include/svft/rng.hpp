#pragma once

#include <cstdint>

namespace svft {

/// Portable deterministic generator (splitmix64).
///
/// Every random quantity in the library (patterns, frozen VeRA factors, LoRA
/// init, synthetic tasks) is drawn from this generator so that golden files
/// are identical across compilers and platforms. The standard library
/// distributions are implementation-defined and are never used.
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() noexcept;

  /// Unbiased integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via Box-Muller (no cached second variate).
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

}  // namespace svft
