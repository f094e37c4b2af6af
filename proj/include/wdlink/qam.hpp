#pragma once

/**
 * @file qam.hpp
 * @brief Gray-coded constellations for 1..6 bits per symbol.
 *
 * Bits are grouped MSB first into a label. All constellations have unit
 * average energy over their points.
 *
 * | bits | name  | geometry                         | labeling                          |
 * |------|-------|----------------------------------|-----------------------------------|
 * | 1    | BPSK  | {-1, +1}                         | 0 -> -1, 1 -> +1                  |
 * | 2    | QPSK  | {+-1} x {+-1} / sqrt(2)          | MSB -> I, LSB -> Q, 0 -> negative |
 * | 3    | 8QAM  | {+-1,+-3} x {+-1} / sqrt(6)      | 2 MSBs Gray on I, LSB on Q        |
 * | 4    | 16QAM | 4x4 square / sqrt(10)            | 2 MSBs Gray on I, 2 LSBs on Q     |
 * | 5    | 32QAM | 6x6 cross (corners removed)      | kCross32Labels (quasi-Gray)       |
 * | 6    | 64QAM | 8x8 square / sqrt(42)            | 3 MSBs Gray on I, 3 LSBs on Q     |
 *
 * PAM Gray order: level index i (ascending amplitude) carries label i ^ (i >> 1).
 */

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "wdlink/types.hpp"

namespace wdlink {

inline constexpr int kMinOrderBits = 1;
inline constexpr int kMaxOrderBits = 6;

inline bool is_supported_order(int bits) { return bits >= kMinOrderBits && bits <= kMaxOrderBits; }

inline std::string order_name(int bits) {
  static const std::array<const char*, 7> names{"none", "BPSK", "QPSK", "8QAM",
                                                "16QAM", "32QAM", "64QAM"};
  return (bits >= 0 && bits <= 6) ? names[bits] : "unsupported";
}

/**
 * Labels for the 32-point cross constellation. Points are enumerated with I
 * outer and Q inner over levels {-5,-3,-1,1,3,5}, skipping the four (+-5,+-5)
 * corners. 56 bit flips over the 52 nearest-neighbour pairs.
 */
inline constexpr std::array<std::uint8_t, 32> kCross32Labels{
    17, 1,  9,  25, 18, 16, 0,  8,  24, 26, 22, 20, 4,  12, 28, 30,
    23, 21, 5,  13, 29, 31, 19, 3,  7,  15, 11, 27, 2,  6,  14, 10};

struct Constellation {
  int bits = 0;
  std::vector<cplx> points;  // indexed by label
  double min_distance = 0.0;

  [[nodiscard]] std::size_t size() const { return points.size(); }

  /// Label of the nearest point.
  [[nodiscard]] unsigned slice(cplx y) const {
    unsigned best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (unsigned l = 0; l < points.size(); ++l) {
      const double d = std::norm(y - points[l]);
      if (d < best_d) {
        best_d = d;
        best = l;
      }
    }
    return best;
  }
};

namespace detail {

inline double pam_level(unsigned gray_label, unsigned levels) {
  unsigned idx = gray_label;  // inverse Gray
  for (unsigned s = 1; s < 8; s <<= 1) idx ^= idx >> s;
  return 2.0 * idx - (levels - 1.0);
}

inline Constellation build_constellation(int bits) {
  Constellation c;
  c.bits = bits;
  const unsigned m = 1u << bits;
  c.points.resize(m);
  switch (bits) {
    case 1:
      c.points = {cplx(-1, 0), cplx(1, 0)};
      break;
    case 3:
      for (unsigned l = 0; l < m; ++l)
        c.points[l] = cplx(pam_level(l >> 1, 4), (l & 1u) ? 1.0 : -1.0);
      break;
    case 5: {
      const std::array<int, 6> lv{-5, -3, -1, 1, 3, 5};
      std::size_t p = 0;
      for (int i : lv)
        for (int q : lv) {
          if (std::abs(i) == 5 && std::abs(q) == 5) continue;
          c.points[kCross32Labels[p++]] = cplx(i, q);
        }
      break;
    }
    default: {  // square: 2, 4, 6
      const unsigned half = static_cast<unsigned>(bits / 2);
      const unsigned levels = 1u << half;
      for (unsigned l = 0; l < m; ++l)
        c.points[l] = cplx(pam_level(l >> half, levels), pam_level(l & (levels - 1), levels));
    }
  }
  double e = 0.0;
  for (const auto& p : c.points) e += std::norm(p);
  const double s = 1.0 / std::sqrt(e / m);
  for (auto& p : c.points) p *= s;
  c.min_distance = std::numeric_limits<double>::infinity();
  for (unsigned a = 0; a < m; ++a)
    for (unsigned b = a + 1; b < m; ++b)
      c.min_distance = std::min(c.min_distance, std::abs(c.points[a] - c.points[b]));
  return c;
}

}  // namespace detail

inline const Constellation& constellation(int bits) {
  require(is_supported_order(bits), "unsupported modulation order: " + std::to_string(bits));
  static const std::array<Constellation, 6> table{
      detail::build_constellation(1), detail::build_constellation(2),
      detail::build_constellation(3), detail::build_constellation(4),
      detail::build_constellation(5), detail::build_constellation(6)};
  return table[static_cast<std::size_t>(bits - 1)];
}

inline unsigned pack_label(std::span<const std::uint8_t> bits) {
  unsigned l = 0;
  for (auto b : bits) l = (l << 1) | (b & 1u);
  return l;
}

inline std::vector<cplx> map_qam(std::span<const std::uint8_t> bits, int order_bits) {
  const auto& c = constellation(order_bits);
  require(bits.size() % static_cast<std::size_t>(order_bits) == 0,
          "bit count must be a multiple of the modulation order");
  std::vector<cplx> out;
  out.reserve(bits.size() / order_bits);
  for (std::size_t i = 0; i < bits.size(); i += order_bits)
    out.push_back(c.points[pack_label(bits.subspan(i, order_bits))]);
  return out;
}

/// Hard-decision demapping, appending `order_bits` bits per symbol.
inline void demap_qam(cplx y, int order_bits, std::vector<std::uint8_t>& out) {
  const unsigned l = constellation(order_bits).slice(y);
  for (int b = order_bits - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((l >> b) & 1u));
}

/// Modulation order per subcarrier; 0 marks an unloaded subcarrier.
struct BitLoadMap {
  std::vector<int> bits;

  [[nodiscard]] static BitLoadMap uniform(int n_subcarriers, int order) {
    return BitLoadMap{std::vector<int>(static_cast<std::size_t>(n_subcarriers), order)};
  }
  [[nodiscard]] std::size_t size() const { return bits.size(); }
  [[nodiscard]] long long total_bits() const {
    return std::accumulate(bits.begin(), bits.end(), 0LL);
  }
};

}  // namespace wdlink
