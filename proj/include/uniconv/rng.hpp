#pragma once

#include <cstdint>

namespace uniconv {

// Counter-based randomness: every draw is a pure function of
// (seed, stream keys). Parallel and sequential evaluation therefore see the
// same numbers regardless of scheduling.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_keys(std::uint64_t seed, std::uint64_t a) {
  return splitmix64(seed ^ splitmix64(a));
}

inline std::uint64_t hash_keys(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return hash_keys(hash_keys(seed, a), b);
}

inline std::uint64_t hash_keys(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                               std::uint64_t c) {
  return hash_keys(hash_keys(seed, a, b), c);
}

/// Uniform in [0,1) with 53 random bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return to_unit(hash_keys(seed, a, b));
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return to_unit(hash_keys(seed, a, b, c));
}

}  // namespace uniconv
