/*
 * rng.hpp
 *
 * Deterministic random streams and hashing. SplitMix64 is used everywhere a
 * sampling result feeds a stored artifact: the algorithm is fully specified,
 * so parallel and serial runs (and reruns) agree bit for bit.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace cag {

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /* uniform in [0, 1) */
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /* standard normal via Box-Muller (fixed algorithm, no libc distribution) */
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692 * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

/* Derive an independent stream id from (seed, index, phase). */
inline uint64_t mix_seed(uint64_t seed, uint64_t index, uint64_t phase = 0) {
  uint64_t z = seed ^ (0x9e3779b97f4a7c15ull + (index << 1)) ^ (phase * 0xd1342543de82ef95ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/* FNV-1a 64-bit, used for config/controller fingerprints in artifacts. */
inline uint64_t fnv64(const void* data, std::size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv64_str(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv64(s.data(), s.size(), h);
}

}  // namespace cag
