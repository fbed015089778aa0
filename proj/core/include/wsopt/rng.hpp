#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wsopt {

/// splitmix64 mixing step; used to derive independent seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministically derive a stream seed from (master, path...). Different
/// paths give statistically independent streams; identical paths collide on
/// purpose so reruns reproduce byte-identical results.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t p : path) s = splitmix64(s ^ (p + 0x632be59bd9b4e019ULL));
  return s;
}

using Rng = std::mt19937_64;

/// Uniform double in [0,1). Hand-rolled instead of std::uniform_real_distribution
/// so the draw sequence does not depend on the standard library implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [a,b).
inline double uniform_real(Rng& rng, double a, double b) {
  return a + (b - a) * uniform01(rng);
}

/// Uniform integer in [lo, hi] inclusive (unbiased by rejection).
inline int uniform_int(Rng& rng, int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = (~0ULL) - ((~0ULL) % span + 1) % span;
  std::uint64_t v;
  do {
    v = rng();
  } while (v > limit);
  return lo + static_cast<int>(v % span);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace wsopt
