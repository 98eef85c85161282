#pragma once

#include <cstdint>
#include <random>

namespace crowdbelief {

/// Deterministic random source. All samplers draw through this class rather
/// than <random> distributions so that a given seed reproduces the same
/// stream bit-for-bit on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();

  /// Uniform on (0, 1]; safe to pass to log().
  double uniform_pos();

  /// Standard normal via Box-Muller (two engine words per draw).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, scale 1) by Marsaglia-Tsang; shape > 0.
  double gamma(double shape);

  /// Inverse gamma with the given shape and rate; shape > 0, rate >= 0.
  /// A zero rate collapses to zero (callers clamp to their variance floor).
  double inverse_gamma(double shape, double rate);

  std::uint64_t next_u64() { return engine_(); }

  /// Derives an independent child stream. Mixing is splitmix64-based so
  /// nearby (seed, stream) pairs do not collide.
  static Rng child(std::uint64_t seed, std::uint64_t stream);

  /// Convenience for multi-index stream derivation.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

 private:
  std::mt19937_64 engine_;
};

}  // namespace crowdbelief
