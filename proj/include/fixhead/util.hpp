#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "fixhead/types.hpp"

namespace fixhead {

// FNV-1a over raw bytes. Used for parameter checksums and shuffle digests;
// pass the previous digest as `h` to chain.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const Vector& v, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double), h);
}

inline std::uint64_t fnv1a64(const Matrix& m, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), h);
}

// Decorrelated per-purpose seed streams (data, init, per-epoch shuffles, ...)
// from one experiment seed. SplitMix64-style avalanche over the pair.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

inline Index next_power_of_two(Index n) {
  Index p = 1;
  while (p < n) p *= 2;
  return p;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace fixhead
