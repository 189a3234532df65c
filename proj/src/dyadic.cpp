#include "uniconv/dyadic.hpp"

#include <bit>

#include "uniconv/errors.hpp"

namespace uniconv {

namespace {

int floor_log2(std::size_t index) { return static_cast<int>(std::bit_width(index)) - 1; }

}  // namespace

DyadicRational DyadicRational::from_heap_index(std::size_t index) {
  if (index == 0) throw DomainError("heap index 0 is not a dyadic rational");
  const int level = floor_log2(index);
  const auto offset = static_cast<std::int64_t>(index - (std::size_t{1} << level));
  return {2 * offset + 1, level + 1};
}

DyadicInterval DyadicInterval::from_heap_index(std::size_t index) {
  if (index == 0) throw DomainError("heap index 0 is not a dyadic interval");
  const int level = floor_log2(index);
  const auto offset = static_cast<std::int64_t>(index - (std::size_t{1} << level));
  return {offset + 1, level};
}

bool DyadicInterval::contains(const DyadicInterval& other) const {
  if (other.n < n) return false;
  const int shift = other.n - n;
  return ((other.k - 1) >> shift) == k - 1;
}

}  // namespace uniconv
