#pragma once

/**
 * @file bitload.hpp
 * @brief SNR-threshold bit loading and capacity arithmetic.
 */

#include <map>

#include "wdlink/bandplan.hpp"
#include "wdlink/ofdm_rx.hpp"
#include "wdlink/qam.hpp"

namespace wdlink {

struct FecProfile {
  double overhead_fraction = 0.155;
  double ber_threshold = 2.2e-2;

  void validate() const {
    require(overhead_fraction > 0.0 && overhead_fraction < 1.0, "FEC overhead must lie in (0, 1)");
    require(ber_threshold > 0.0 && ber_threshold < 0.5, "FEC BER threshold must lie in (0, 0.5)");
  }
};

inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/**
 * @brief Approximate Gray-coded bit error rate on AWGN at symbol SNR `snr_db`.
 *
 * Square and 32-point cross constellations use
 * (4/b)(1 - 1/sqrt(M)) Q(sqrt(3 g/(M - 1))) with sqrt(M) = 2^(b/2). The
 * rectangular 8QAM uses its own nearest-neighbour count and distance:
 * (5/6) Q(sqrt(g/3)).
 */
inline double ber_mqam(double snr_db, int order_bits) {
  require(is_supported_order(order_bits), "unsupported modulation order: " + std::to_string(order_bits));
  const double g = db_to_lin(snr_db);
  if (order_bits == 1) return q_function(std::sqrt(2.0 * g));
  if (order_bits == 3) return 5.0 / 6.0 * q_function(std::sqrt(g / 3.0));
  const double b = order_bits;
  const double m = std::pow(2.0, b);
  const double sqrt_m = std::pow(2.0, b / 2.0);
  return 4.0 / b * (1.0 - 1.0 / sqrt_m) * q_function(std::sqrt(3.0 * g / (m - 1.0)));
}

/// Lowest SNR (dB) at which `order_bits` meets `ber_threshold`, by bisection.
inline double min_snr_db(int order_bits, double ber_threshold) {
  double lo = -20.0, hi = 60.0;
  require(ber_mqam(hi, order_bits) <= ber_threshold, "BER threshold unreachable");
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ber_mqam(mid, order_bits) <= ber_threshold ? hi : lo) = mid;
  }
  return hi;
}

/// order_bits -> minimum SNR in dB.
inline std::map<int, double> threshold_table(const FecProfile& fec) {
  fec.validate();
  std::map<int, double> t;
  for (int b = kMinOrderBits; b <= kMaxOrderBits; ++b) t[b] = min_snr_db(b, fec.ber_threshold);
  return t;
}

/// Largest supported order meeting the threshold at `snr_db`; 0 if none does.
inline int bits_for_snr(double snr_db, const FecProfile& fec) {
  if (!std::isfinite(snr_db)) return snr_db > 0 ? kMaxOrderBits : 0;
  for (int b = kMaxOrderBits; b >= kMinOrderBits; --b)
    if (ber_mqam(snr_db, b) <= fec.ber_threshold) return b;
  return 0;
}

/// Subcarriers outside the detect window, nulls and unavailable metrics get 0 bits.
inline BitLoadMap load_bits(const SubcarrierMetrics& metrics, const FecProfile& fec,
                            const BandPlan& plan) {
  fec.validate();
  BitLoadMap map = BitLoadMap::uniform(plan.n_subcarriers, 0);
  const auto det = detected_indices(plan);
  for (const auto& m : metrics.items) {
    if (!m.available || m.index < 0 || m.index >= plan.n_subcarriers) continue;
    if (!std::binary_search(det.begin(), det.end(), m.index)) continue;
    map.bits[static_cast<std::size_t>(m.index)] = bits_for_snr(m.snr_db, fec);
  }
  return map;
}

struct BandCapacity {
  BandId band = BandId::W;
  double raw_gbps = 0.0;
  double raw_cp_gbps = 0.0;  // raw * (1 - cp_fraction)
  double net_gbps = 0.0;
  int detected_subcarriers = 0;
  int loaded_subcarriers = 0;
  long long bits_per_symbol = 0;
};

inline BandCapacity capacity(const BitLoadMap& map, const BandPlan& plan, const FecProfile& fec,
                             double cp_fraction) {
  fec.validate();
  require(map.size() == 0 || map.size() == static_cast<std::size_t>(plan.n_subcarriers),
          "bit-load map does not match the band plan");
  require(cp_fraction >= 0.0 && cp_fraction < 0.5, "cp_fraction must lie in [0, 0.5)");
  BandCapacity c;
  c.band = plan.name;
  c.detected_subcarriers = static_cast<int>(detected_indices(plan).size());
  for (std::size_t k = 0; k < map.size(); ++k) {
    const int b = map.bits[k];
    require(b >= 0 && b <= kMaxOrderBits, "bit-load entry out of range");
    require(b == 0 || !plan.is_null(static_cast<int>(k)), "null subcarrier carries bits");
    c.bits_per_symbol += b;
    c.loaded_subcarriers += b > 0;
  }
  c.raw_gbps = static_cast<double>(c.bits_per_symbol) * plan.spacing_hz / 1e9;
  c.raw_cp_gbps = c.raw_gbps * (1.0 - cp_fraction);
  c.net_gbps = c.raw_gbps / (1.0 + fec.overhead_fraction);
  return c;
}

struct CapacityReport {
  std::vector<BandCapacity> bands;
  double total_raw_gbps = 0.0;
  double total_raw_cp_gbps = 0.0;
  double total_net_gbps = 0.0;
};

inline CapacityReport combine(std::vector<BandCapacity> bands) {
  CapacityReport r;
  for (const auto& b : bands) {
    r.total_raw_gbps += b.raw_gbps;
    r.total_raw_cp_gbps += b.raw_cp_gbps;
    r.total_net_gbps += b.net_gbps;
  }
  r.bands = std::move(bands);
  return r;
}

}  // namespace wdlink
