#pragma once

#include <cstdint>
#include <random>

namespace cachelm {

// Deterministic draws on top of std::mt19937_64. The std distribution
// objects are implementation-defined, so sampling goes through these
// helpers to keep outputs identical across standard libraries.

inline double uniform_unit(std::mt19937_64& gen) {
  // 53 random bits -> [0, 1)
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform_real(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(gen);
}

// Unbiased integer draw in [0, n).
inline std::uint64_t uniform_index(std::mt19937_64& gen, std::uint64_t n) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % n;
}

inline bool bernoulli(std::mt19937_64& gen, double p) {
  return uniform_unit(gen) < p;
}

// SplitMix64 step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace cachelm
