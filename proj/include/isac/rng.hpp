#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace isac {

using Rng = std::mt19937_64;

namespace detail {

// SplitMix64 finalizer, used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  return detail::mix64(detail::mix64(seed ^ detail::mix64(tag)) ^ detail::mix64(index));
}

/// Independent deterministic stream for (seed, tag, index). Streams with
/// distinct coordinates are decorrelated, so parallel workers can own one
/// stream per work item and still reproduce the serial result.
inline Rng substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, tag, index));
}

/// Uniform double in [0, 1) built from the top 53 bits; avoids the
/// implementation-defined std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double uniform_phase(Rng& rng) { return 2.0 * std::numbers::pi * uniform01(rng); }

/// Circularly-symmetric complex Gaussian CN(0, variance); real and imaginary
/// parts are independent N(0, variance/2).
inline std::complex<double> complex_gaussian(Rng& rng, double variance) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  const double radius = std::sqrt(-variance * std::log1p(-u1));
  return std::polar(radius, 2.0 * std::numbers::pi * u2);
}

/// One N(0, variance) draw (Box-Muller cosine branch).
inline double real_gaussian(Rng& rng, double variance) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * variance * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace isac
