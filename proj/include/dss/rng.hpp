#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace dss {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a (parent, tag...) path. Every worker/episode/phase seed in
/// the project is derived this way from the single run seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                           std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(parent);
  for (auto t : tags) s = splitmix64(s ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

/// Uniform double in (0, 1) from a 64-bit hash, never exactly 0.
inline double unit_from_bits(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform in [0, 1). Portable: does not depend on the standard library's
/// distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [lo, hi] (inclusive) using rejection-free multiply-shift.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<unsigned __int128>(hi - lo + 1);
  const auto r = static_cast<unsigned __int128>(rng());
  return lo + static_cast<std::int64_t>((r * span) >> 64);
}

/// Standard normal via Box-Muller.
inline double normal01(Rng& rng) {
  const double u1 = unit_from_bits(rng());
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 handled by the boost trick.
inline double gamma_sample(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double u = unit_from_bits(rng());
    return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal01(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = unit_from_bits(rng());
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace dss
