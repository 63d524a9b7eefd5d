#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace bsca {

/// splitmix64 generator. Chosen over std::mt19937 because the standard does not
/// pin down distribution algorithms; this generator plus the transforms below
/// give the same stream on every platform.
///
/// Draw order contract: callers consume values strictly in call order, and every
/// seeded run performs the same sequence of calls.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Modulo reduction; bias is negligible for the
  /// small n used here (shuffles over at most a few thousand elements).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller. Draws two uniforms per pair; the second
  /// value is cached, keeping the draw count deterministic.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    do {
      u = uniform();
    } while (u <= 0.0);
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Fisher-Yates shuffle, descending index order.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derives an independent stream for (seed, tags...). Used to give each
  /// fold/epoch/volume its own reproducible generator.
  static Rng stream(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b = 0) {
    Rng mix(seed);
    std::uint64_t s = mix.next_u64();
    s ^= Rng(tag_a + 0x517cc1b727220a95ULL).next_u64();
    s ^= Rng(tag_b + 0x2545f4914f6cdd1dULL).next_u64();
    return Rng(s);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bsca
