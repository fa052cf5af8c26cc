#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "fixhead/types.hpp"

namespace fixhead {

// SplitMix64: a counter-based 64-bit generator (Weyl increment plus avalanche
// finalizer). Written out here instead of using a platform engine so the same
// seed yields the same stream on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal draw, polar Box-Muller variant. Draws come in pairs; the
  // second of each pair is served on the next call.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double a, b, s;
    do {
      a = 2.0 * next_unit() - 1.0;
      b = 2.0 * next_unit() - 1.0;
      s = a * a + b * b;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = b * m;
    has_spare_ = true;
    return a * m;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Vector rng_normal(Rng& rng, Index n) {
  if (n <= 0) throw std::invalid_argument("rng_normal: n must be positive");
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.next_normal();
  return v;
}

}  // namespace fixhead
