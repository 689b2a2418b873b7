#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace kubewatt {

// splitmix64; used everywhere randomness is needed so that outputs are
// bit-reproducible across platforms and standard-library versions.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in (0, 1]; never 0 so it is safe under log()
  double next_unit() {
    return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  }

  double next_gaussian() {
    // Box-Muller, one value per call
    double u1 = next_unit();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // uniform integer in [lo, hi], hi - lo + 1 must be a power of two for
  // exact uniformity; callers in this codebase only use such ranges
  std::uint64_t next_in_pow2_range(std::uint64_t lo, std::uint64_t hi) {
    return lo + (next() & (hi - lo));
  }
};

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  SplitMix64 rng(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
  return rng.next();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace kubewatt
