#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace haggle {

inline constexpr int kMaxCatalogSize = 16;

/// A nonempty subset of the shop's n goods, stored as a bit vector.
/// Bit i set means good i is part of the bundle. The empty set is not a
/// valid bundle.
class Bundle {
 public:
  Bundle(std::uint32_t bits, int n) : bits_(bits), n_(n) {
    if (n < 1 || n > kMaxCatalogSize)
      throw std::invalid_argument("Bundle: catalog size out of range");
    if (bits == 0) throw std::invalid_argument("Bundle: empty bundle");
    if (bits >> n) throw std::invalid_argument("Bundle: bits exceed catalog");
  }

  static Bundle from_goods(const std::vector<int>& goods, int n) {
    std::uint32_t bits = 0;
    for (int g : goods) {
      if (g < 0 || g >= n) throw std::invalid_argument("Bundle: good out of range");
      bits |= 1u << g;
    }
    return Bundle(bits, n);
  }

  std::uint32_t bits() const { return bits_; }
  int catalog_size() const { return n_; }
  int size() const { return std::popcount(bits_); }
  bool contains(int good) const { return (bits_ >> good) & 1u; }

  /// Binary-string form, most-significant good first: n=4, {0,2} -> "0101".
  std::string to_bit_string() const {
    std::string s(n_, '0');
    for (int i = 0; i < n_; ++i)
      if (contains(i)) s[n_ - 1 - i] = '1';
    return s;
  }

  /// Sorted good-index list, e.g. "[0,2]".
  std::string to_good_list() const {
    std::string s = "[";
    bool first = true;
    for (int i = 0; i < n_; ++i) {
      if (!contains(i)) continue;
      if (!first) s += ',';
      s += std::to_string(i);
      first = false;
    }
    return s + "]";
  }

  friend bool operator==(const Bundle& a, const Bundle& b) {
    return a.bits_ == b.bits_ && a.n_ == b.n_;
  }
  // Total order by bit-vector value; gives deterministic iteration and
  // tie-breaking everywhere downstream.
  friend auto operator<=>(const Bundle& a, const Bundle& b) {
    return a.bits_ <=> b.bits_;
  }

 private:
  std::uint32_t bits_;
  int n_;
};

inline int hamming(const Bundle& a, const Bundle& b) {
  if (a.catalog_size() != b.catalog_size())
    throw std::invalid_argument("hamming: mismatched catalog sizes");
  return std::popcount(a.bits() ^ b.bits());
}

/// All 2^n - 1 nonempty bundles, ascending by bit-vector value.
inline std::vector<Bundle> all_bundles(int n) {
  if (n < 1 || n > kMaxCatalogSize)
    throw std::invalid_argument("all_bundles: catalog size out of range");
  std::vector<Bundle> out;
  out.reserve((1u << n) - 1);
  for (std::uint32_t bits = 1; bits < (1u << n); ++bits) out.emplace_back(bits, n);
  return out;
}

/// Hamming-distance-1 neighborhood: every nonempty bundle obtained by adding
/// or removing a single good. Ascending by bit-vector value.
inline std::vector<Bundle> neighborhood(const Bundle& b) {
  std::vector<Bundle> out;
  const int n = b.catalog_size();
  out.reserve(n);
  for (std::uint32_t flipped = 1; flipped < (1u << n); ++flipped) {
    // cheaper to flip each bit, but we want ascending order without a sort
    if (std::popcount(flipped ^ b.bits()) == 1) out.emplace_back(flipped, n);
  }
  return out;
}

}  // namespace haggle
