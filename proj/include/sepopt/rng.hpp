#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace sepopt {

/// Seeded 64-bit generator with platform-independent derived draws.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not, so index and real draws are derived here by hand.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    std::uint64_t r = engine_();
    while (r < threshold) r = engine_();
    return r % n;
  }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform real in [lo, hi]; returns lo exactly when lo == hi.
  double uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return lo + (hi - lo) * uniform01();
  }

  /// Index l with probability weights[l] / sum(weights).
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights must have positive mass");
    const double u = uniform01() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l] <= 0.0) continue;
      acc += weights[l];
      last_positive = l;
      if (u < acc) return l;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace sepopt
