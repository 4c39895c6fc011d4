// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace relscore {

// All randomness in a run flows through one of these, seeded once.
using Rng = std::mt19937_64;

// The standard <random> distributions are implementation-defined, so runs
// would not reproduce across standard libraries. These hand-rolled variants
// consume a fixed number of engine outputs and behave identically everywhere.

// Uniform double in [0, 1) with 53 bits of entropy (one engine draw).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (two engine draws, cosine branch only).
inline double gaussian(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  const double two_pi = 6.283185307179586476925286766559;
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  return mean + stddev * z;
}

// Uniform index in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

// Fisher-Yates shuffle with a fixed draw pattern.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace relscore
