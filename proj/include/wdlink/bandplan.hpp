#pragma once

/**
 * @file bandplan.hpp
 * @brief W-band and D-band subcarrier grids.
 *
 * Subcarriers are indexed 0..N-1 symmetric about the band center with an even
 * count, so no subcarrier sits on the center frequency itself. The two
 * outermost subcarriers of each band carry no data.
 */

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "wdlink/types.hpp"

namespace wdlink {

enum class BandId { W, D };

inline std::string to_string(BandId b) { return b == BandId::W ? "W" : "D"; }

inline BandId band_from_string(const std::string& s) {
  if (s == "W" || s == "w") return BandId::W;
  if (s == "D" || s == "d") return BandId::D;
  throw ConfigError("unknown band '" + s + "' (expected W or D)");
}

struct BandPlan {
  BandId name = BandId::W;
  double center_hz = 0.0;
  int n_subcarriers = 0;
  double spacing_hz = 0.0;
  std::vector<int> null_indices;  // sorted, unique
  FreqInterval detect_window_hz;

  [[nodiscard]] double span_hz() const { return n_subcarriers * spacing_hz; }
  [[nodiscard]] double lower_edge_hz() const { return center_hz - span_hz() / 2.0; }
  [[nodiscard]] double upper_edge_hz() const { return center_hz + span_hz() / 2.0; }

  [[nodiscard]] bool is_null(int k) const {
    return std::binary_search(null_indices.begin(), null_indices.end(), k);
  }

  void validate() const {
    require(n_subcarriers >= 4 && n_subcarriers % 2 == 0,
            "band plan needs an even subcarrier count >= 4");
    require(spacing_hz > 0.0 && std::isfinite(spacing_hz), "subcarrier spacing must be positive");
    require(std::isfinite(center_hz) && center_hz > span_hz() / 2.0,
            "band center must exceed half the span");
    require(std::is_sorted(null_indices.begin(), null_indices.end()) &&
                std::adjacent_find(null_indices.begin(), null_indices.end()) == null_indices.end(),
            "null indices must be sorted and unique");
    for (int k : null_indices)
      require(k >= 0 && k < n_subcarriers, "null index out of range: " + std::to_string(k));
    require(is_null(0) && is_null(n_subcarriers - 1), "band-edge subcarriers must be nulled");
    require(detect_window_hz.lo_hz < detect_window_hz.hi_hz, "detect window is empty");
    // 1 Hz slack for decimal round-off in configuration files.
    require(detect_window_hz.lo_hz >= lower_edge_hz() - 1.0 &&
                detect_window_hz.hi_hz <= upper_edge_hz() + 1.0,
            "detect window must lie inside the band span");
  }
};

/// W plan (92.5 GHz, 35 GHz span) and D plan (130 GHz, 40 GHz span).
inline std::pair<BandPlan, BandPlan> make_default_plans() {
  BandPlan w;
  w.name = BandId::W;
  w.center_hz = 92.5e9;
  w.n_subcarriers = 256;
  w.spacing_hz = 35e9 / 256.0;
  w.null_indices = {0, 255};
  w.detect_window_hz = {75e9, 110e9};

  BandPlan d;
  d.name = BandId::D;
  d.center_hz = 130e9;
  d.n_subcarriers = 256;
  d.spacing_hz = 40e9 / 256.0;
  d.null_indices = {0, 255};
  d.detect_window_hz = {133e9, 150e9};
  return {w, d};
}

inline double subcarrier_center(const BandPlan& plan, int index) {
  if (index < 0 || index >= plan.n_subcarriers)
    throw std::out_of_range("subcarrier index " + std::to_string(index) + " out of range");
  return plan.center_hz + (index - (plan.n_subcarriers - 1) / 2.0) * plan.spacing_hz;
}

/// Non-null subcarriers in ascending order.
inline std::vector<int> data_indices(const BandPlan& plan) {
  std::vector<int> out;
  out.reserve(plan.n_subcarriers);
  for (int k = 0; k < plan.n_subcarriers; ++k)
    if (!plan.is_null(k)) out.push_back(k);
  return out;
}

/// Non-null subcarriers whose center lies inside the receiver's detect window.
inline std::vector<int> detected_indices(const BandPlan& plan) {
  std::vector<int> out;
  for (int k : data_indices(plan))
    if (plan.detect_window_hz.contains(subcarrier_center(plan, k))) out.push_back(k);
  return out;
}

/// Spectral gap between the top modulated edge of `lower` and the bottom modulated edge of `upper`.
inline double inter_band_gap_hz(const BandPlan& lower, const BandPlan& upper) {
  const auto lo_data = data_indices(lower);
  const auto hi_data = data_indices(upper);
  require(!lo_data.empty() && !hi_data.empty(), "band has no data subcarriers");
  const double top = subcarrier_center(lower, lo_data.back()) + lower.spacing_hz / 2.0;
  const double bottom = subcarrier_center(upper, hi_data.front()) - upper.spacing_hz / 2.0;
  return bottom - top;
}

}  // namespace wdlink
