#pragma once

#include <cstdint>
#include <random>

namespace reschunk {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds from a root
// seed plus stream indices so that per-step/per-window randomness is stable
// regardless of evaluation order.
inline std::uint64_t mix_seed(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

inline Rng split_rng(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) {
  return Rng(mix_seed(mix_seed(root ^ (a * 0x9e3779b97f4a7c15ULL)) ^ b));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Gumbel(0,1) sample via inverse CDF; the argument of the inner log is kept
// strictly inside (0,1).
inline double gumbel01(Rng& rng) {
  std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
  return -std::log(-std::log(u(rng)));
}

inline double normal01(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace reschunk
