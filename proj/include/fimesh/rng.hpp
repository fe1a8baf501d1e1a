// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "fimesh/common.hpp"

namespace fimesh {

// One master seed per run; every consumer derives its own stream by name
// ("split", "init", "frame/17", ...) so adding a consumer never shifts the
// draws of another. Distribution helpers below are hand-rolled because the
// std::uniform_* distributions are not bit-portable across standard
// libraries.

inline std::uint64_t stream_seed(std::uint64_t master, std::string_view name) {
  std::uint64_t h = fnv1a64(&master, sizeof(master));
  h = fnv1a64(name.data(), name.size(), h);
  // splitmix64 finalizer, decorrelates nearby seeds
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t master, std::string_view name) {
  return std::mt19937_64(stream_seed(master, name));
}

// Uniform in [0, 1), 53-bit resolution.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [0, n). Rejection-free would bias for huge n; the
// rejection loop below is exact for any n.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = ~0ull - ~0ull % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Box-Muller; consumes exactly two draws per pair.
inline void normal_pair(std::mt19937_64& rng, double& a, double& b) {
  double u1 = uniform_unit(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform_unit(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * 3.14159265358979323846 * u2;
  a = r * std::cos(t);
  b = r * std::sin(t);
}

}  // namespace fimesh
