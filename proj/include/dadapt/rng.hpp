#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dadapt {

// Deterministic RNG used everywhere. mt19937_64 output is pinned by the
// standard, and all distributions below are built from raw engine draws
// (std::*_distribution is implementation-defined, so we avoid it), which
// makes seeded runs bit-identical across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // uniform in (0, 1); never returns an exact 0 (log-safe)
  double uniform_open() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, both values used
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double gumbel() { return -std::log(-std::log(uniform_open())); }

  // difference of two independent Gumbels
  double logistic() {
    double u = uniform_open();
    return std::log(u / (1.0 - u));
  }

  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  // stable derived seed for per-item streams
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dadapt
