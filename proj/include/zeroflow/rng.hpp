#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace zf {

/// Seedable generator whose output is identical on every platform:
/// mt19937_64's bit stream is fixed by the standard, and every transform
/// below is written out here instead of using <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1).
  double uniform_open();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Gamma(alpha, 1) by the Marsaglia-Tsang squeeze; alpha < 1 via boosting.
  double gamma(double alpha);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// SplitMix64 mix of (seed, stream): independent child seeds for
/// sub-generators so that adding a consumer never shifts another's stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace zf
