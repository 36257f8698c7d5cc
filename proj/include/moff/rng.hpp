#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace moff {

// All randomness in the toolkit flows from one user-supplied seed. Every
// component derives its own stream from (seed, name), so adding or reordering
// components never perturbs the draws an existing component sees.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::mt19937_64 named_stream(std::uint64_t seed, std::string_view component) {
  const std::uint64_t h = fnv1a64(component);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

// Uniform in [0, 1) with 53-bit resolution. std::uniform_real_distribution is
// implementation-defined, so draws are produced directly from the engine.
inline double u01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * u01(rng);
}

// Box-Muller transform.
inline double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - u01(rng);  // (0, 1], keeps the log finite
  const double u2 = u01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(u01(rng) * static_cast<double>(n));
}

// Fisher-Yates with draws taken directly from the engine; std::shuffle is
// implementation-defined.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

}  // namespace moff
