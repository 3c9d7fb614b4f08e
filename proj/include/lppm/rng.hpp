#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lppm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer applied to (master, stream). Independent child
/// seeds for replicates, pairs and Monte Carlo windows are all derived
/// through this one function.
constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) { return Rng(split_seed(master, stream)); }

/// Uniform draw in [0, 1) from the top 53 bits; unlike
/// std::uniform_real_distribution the sequence is fixed across standard
/// library implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double exponential(Rng& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

/// Box-Muller, one variate per call.
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace lppm
