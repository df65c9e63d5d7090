#pragma once

// Explicit, seedable random source. Every sampler takes an Rng& so runs are
// replayable from a 64-bit seed; the variate transforms below are written out
// rather than taken from <random> distributions, whose output is
// implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gm {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Standard exponential variate.
inline double exponential(Rng& rng) { return -std::log1p(-uniform01(rng)); }

/// Standard normal variate (Box-Muller, one output per call).
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Uniform integer in [0, bound), unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

/// Uniform weights on the k-simplex.
inline std::vector<double> sample_flat_dirichlet(std::size_t k, Rng& rng) {
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) total += (x = exponential(rng));
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace gm
