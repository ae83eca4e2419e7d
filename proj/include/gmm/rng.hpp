#pragma once

#include <cmath>
#include <cstdint>

namespace gmm {

/// Splittable 64-bit generator (splitmix64 core). Every stochastic operation
/// in the library takes an explicit seed or an Rng stream, so runs are
/// bit-exact reproducible regardless of platform or standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1), safe for log().
  double next_double_open() {
    double u;
    do {
      u = next_double();
    } while (u <= 0.0);
    return u;
  }

  /// Standard normal via the Marsaglia polar method; second value cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Independent child stream derived from the current state.
  Rng split() { return Rng(mix(next_u64(), 0x5851f42d4c957f2dULL)); }

  /// Independent stream addressed by index; does not advance this generator.
  Rng stream(std::uint64_t idx) const {
    return Rng(mix(state_ ^ 0x2545f4914f6cdd1dULL, idx));
  }

  std::uint64_t state() const { return state_; }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gmm
