#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace uniconv {

// Both dyadic rationals in (0,1) and dyadic intervals share one heap
// numbering: the interval [(k-1)2^-n, k2^-n] and its midpoint
// (2k-1)2^-(n+1) get index 2^n + k - 1. Index 1 is [0,1] / 1/2.

/// d = k * 2^-n with k odd, 0 < k < 2^n. rank(d) = n.
struct DyadicRational {
  std::int64_t k = 1;
  int n = 1;

  double value() const { return std::ldexp(static_cast<double>(k), -n); }
  int rank() const { return n; }
  std::size_t heap_index() const {
    return (std::size_t{1} << (n - 1)) + static_cast<std::size_t>((k - 1) / 2);
  }
  static DyadicRational from_heap_index(std::size_t index);
  bool valid() const { return n >= 1 && k > 0 && (k & 1) == 1 && k < (std::int64_t{1} << n); }

  friend bool operator==(const DyadicRational&, const DyadicRational&) = default;
};

/// [(k-1) 2^-n, k 2^-n] with 1 <= k <= 2^n. rank = n.
struct DyadicInterval {
  std::int64_t k = 1;
  int n = 0;

  double lo() const { return std::ldexp(static_cast<double>(k - 1), -n); }
  double hi() const { return std::ldexp(static_cast<double>(k), -n); }
  double length() const { return std::ldexp(1.0, -n); }
  int rank() const { return n; }
  std::size_t heap_index() const {
    return (std::size_t{1} << n) + static_cast<std::size_t>(k - 1);
  }
  static DyadicInterval from_heap_index(std::size_t index);
  DyadicRational midpoint() const { return {2 * k - 1, n + 1}; }
  DyadicInterval left_child() const { return {2 * k - 1, n + 1}; }
  DyadicInterval right_child() const { return {2 * k, n + 1}; }
  DyadicInterval parent() const { return {(k + 1) / 2, n - 1}; }
  bool contains(const DyadicInterval& other) const;
  bool valid() const { return n >= 0 && k >= 1 && k <= (std::int64_t{1} << n); }

  /// Maps a dyadic rational of [0,1] into this interval (L_I).
  DyadicRational map(const DyadicRational& local) const {
    return {(k - 1) * (std::int64_t{1} << local.n) + local.k, n + local.n};
  }
  double map(double t) const { return lo() + t * length(); }

  friend bool operator==(const DyadicInterval&, const DyadicInterval&) = default;
};

/// Index of the rank-n dyadic interval containing x, right-continuous (x = 1 maps to the last cell).
inline std::int64_t cell_of(double x, int n) {
  const std::int64_t cells = std::int64_t{1} << n;
  auto c = static_cast<std::int64_t>(std::floor(x * static_cast<double>(cells)));
  if (c < 0) c = 0;
  if (c >= cells) c = cells - 1;
  return c;
}

/// Distance on the circle R/Z, e.g. cyclic_distance(0.9, 0) = 0.1.
inline double cyclic_distance(double x, double y) {
  double d = std::fmod(std::abs(x - y), 1.0);
  return d > 0.5 ? 1.0 - d : d;
}

/// Representative of a mod n in {-floor((n-1)/2), ..., floor(n/2)}.
inline std::int64_t centered_mod(std::int64_t a, std::int64_t n) {
  std::int64_t r = ((a % n) + n) % n;
  if (r > n / 2) r -= n;
  return r;
}

}  // namespace uniconv
