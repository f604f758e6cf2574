#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eve {

// All randomness in this project flows through std::mt19937_64 with the
// explicit draw mappings below. The standard pins the engine's output
// sequence bit-exactly, and we never use std::*_distribution (whose output
// is implementation-defined), so every seeded result is reproducible across
// compilers and platforms.

/// Engine seeded from a user seed plus context words (dimensions, stream id).
inline std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t a = 0,
                                     std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

/// Strictly inside (0,1): top 53 bits of the draw, offset by half an ulp.
inline double unit_open(std::mt19937_64& eng) {
  return (static_cast<double>(eng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

/// Uniform on the open interval (-scale, scale).
inline double uniform_symmetric(std::mt19937_64& eng, double scale) {
  return scale * (2.0 * unit_open(eng) - 1.0);
}

/// Unbiased-enough index draw for shuffles; documented as eng() % n.
inline std::size_t index_below(std::mt19937_64& eng, std::size_t n) {
  return static_cast<std::size_t>(eng() % n);
}

/// FNV-1a 64-bit hash over the bytes of a string.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace eve
