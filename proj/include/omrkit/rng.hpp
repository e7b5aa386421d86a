#pragma once

#include <cstdint>
#include <random>

namespace omrkit {

/// Seeded random stream with library-independent draws. The standard
/// distributions are implementation-defined, so uniform and normal variates
/// are derived here directly from the 64-bit Mersenne Twister output to keep
/// generated artifacts byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), rejection sampled (no modulo bias). n > 0.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal variate (Box-Muller, one value per call).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Per-item sub-seed for page-level work: seed XOR item index.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return seed ^ index;
}

}  // namespace omrkit
