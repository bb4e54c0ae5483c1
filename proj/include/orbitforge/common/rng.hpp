#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace orbitforge {

/// Seeded pseudo-random source shared by every simulator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions are implemented here rather than taken from
/// <random> because the standard leaves their algorithms unspecified, and
/// event logs must be byte-identical for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (consumes two uniforms per call).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Unbiased integer in [0, n). Requires n > 0.
  std::size_t index(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream, keyed by a label so that adding a consumer
  /// does not shift the draws of the others.
  Rng fork(std::string_view label) const { return Rng(derive_seed(seed_, label)); }

  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace orbitforge
