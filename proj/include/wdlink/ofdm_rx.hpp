#pragma once

/**
 * @file ofdm_rx.hpp
 * @brief Receiver DSP: training-based sync, CP-OFDM demodulation, one-tap
 * equalization with pilot common-phase-error removal, data-aided EVM.
 */

#include <algorithm>
#include <limits>
#include <optional>

#include "wdlink/bandplan.hpp"
#include "wdlink/fft.hpp"
#include "wdlink/ofdm_tx.hpp"
#include "wdlink/types.hpp"

namespace wdlink {

/// Minimum normalized training correlation accepted as a frame.
inline constexpr double kSyncThreshold = 0.5;

struct SyncResult {
  std::size_t offset = 0;
  double correlation = 0.0;  // normalized, 1.0 for an exact match
};

/**
 * @brief Finds the frame start by cross-correlating with the known training symbols.
 *
 * The reference contains only the FrameRef's sync carriers (the detected
 * subcarriers), regenerated at the waveform's own sample rate.
 */
inline SyncResult synchronize_detail(const ComplexWaveform& w, const FrameRef& ref) {
  const double fs = w.sample_rate_hz;
  const std::size_t frame = ref.frame_len(fs);
  if (w.size() < frame) throw SyncError("waveform shorter than one frame");

  const auto r = modulate_symbols(ref, ref.training, ref.sync_carriers, fs, w.rf_anchor_hz());
  const std::size_t nr = r.size();
  const std::size_t n_off = w.size() - frame + 1;
  std::size_t p = 1;
  while (p < w.size() + nr) p <<= 1;

  Fft fwd(p, FftDirection::Forward);
  Fft inv(p, FftDirection::Inverse);
  auto ys = fwd(w.samples);
  const auto rs = fwd(r);
  for (std::size_t k = 0; k < p; ++k) ys[k] *= std::conj(rs[k]);
  const auto corr = inv(ys);  // corr[d] * p = sum_i y[d+i] conj(r[i])

  double er = 0.0;
  for (const auto& v : r) er += std::norm(v);
  std::vector<double> cum(w.size() + 1, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) cum[i + 1] = cum[i] + std::norm(w.samples[i]);

  SyncResult best;
  for (std::size_t d = 0; d < n_off; ++d) {
    const double ey = cum[d + nr] - cum[d];
    if (ey <= 0.0) continue;
    const double rho = std::abs(corr[d]) / static_cast<double>(p) / std::sqrt(er * ey);
    if (rho > best.correlation) best = {d, rho};
  }
  if (best.correlation < kSyncThreshold)
    throw SyncError("no training correlation peak above threshold (best " +
                    std::to_string(best.correlation) + ")");
  return best;
}

inline std::size_t synchronize(const ComplexWaveform& w, const FrameRef& ref) {
  return synchronize_detail(w, ref).offset;
}

/// Raw DFT outputs, [symbol][subcarrier], training rows first. Null subcarriers are zero.
struct RawSymbols {
  std::vector<std::vector<cplx>> rows;
};

inline RawSymbols demodulate(const ComplexWaveform& w, const FrameRef& ref, std::ptrdiff_t offset) {
  const double fs = w.sample_rate_hz;
  const std::size_t n_fft = ref.fft_size(fs);
  const std::size_t cp = ref.cp_len(fs);
  const std::size_t sym = n_fft + cp;
  const std::size_t n_rows = static_cast<std::size_t>(ref.n_training() + ref.n_payload());
  if (offset < 0 || static_cast<std::size_t>(offset) + n_rows * sym > w.size())
    throw SyncError("frame truncated at offset " + std::to_string(offset));

  const double shift = ref.grid_offset_hz(w.rf_anchor_hz());
  const double norm = 1.0 / (static_cast<double>(n_fft) * ref.tx_scale);
  Fft f(n_fft, FftDirection::Forward);
  std::vector<cplx> buf(n_fft), spec(n_fft);
  RawSymbols raw;
  raw.rows.assign(n_rows, std::vector<cplx>(static_cast<std::size_t>(ref.plan.n_subcarriers)));
  for (std::size_t s = 0; s < n_rows; ++s) {
    const std::size_t rel0 = s * sym + cp;
    for (std::size_t i = 0; i < n_fft; ++i) {
      const std::size_t rel = rel0 + i;
      buf[i] = w.samples[static_cast<std::size_t>(offset) + rel] *
               std::polar(1.0, -kTwoPi * shift * static_cast<double>(rel) / fs);
    }
    f.execute(buf, spec);
    for (int k : ref.active)
      raw.rows[s][static_cast<std::size_t>(k)] =
          spec[detail::subcarrier_bin(k, ref.plan.n_subcarriers, n_fft)] * norm;
  }
  return raw;
}

struct EqualizerOptions {
  bool remove_cpe = true;
  /// Taps weaker than this fraction of the strongest tap mark a dead subcarrier.
  double dead_tap_ratio = 1e-6;
};

struct Equalized {
  std::vector<std::vector<cplx>> rows;  // payload only, [symbol][subcarrier]
  std::vector<cplx> taps;
  std::vector<bool> dead;
  std::vector<double> cpe_rad;  // per payload symbol
};

inline Equalized equalize(const RawSymbols& raw, const FrameRef& ref, EqualizerOptions opt = {}) {
  const auto n_sub = static_cast<std::size_t>(ref.plan.n_subcarriers);
  const auto n_tr = static_cast<std::size_t>(ref.n_training());
  require(n_tr >= 1, "equalize: training symbols missing");
  require(raw.rows.size() == n_tr + ref.payload.size(), "equalize: row count mismatch");

  Equalized eq;
  eq.taps.assign(n_sub, cplx{});
  eq.dead.assign(n_sub, true);
  double strongest = 0.0;
  for (int k : ref.active) {
    const auto ku = static_cast<std::size_t>(k);
    cplx acc{};
    for (std::size_t t = 0; t < n_tr; ++t) acc += raw.rows[t][ku] / ref.training[t][ku];
    eq.taps[ku] = acc / static_cast<double>(n_tr);
    strongest = std::max(strongest, std::abs(eq.taps[ku]));
  }
  for (int k : ref.active) {
    const auto ku = static_cast<std::size_t>(k);
    eq.dead[ku] = !(std::abs(eq.taps[ku]) > opt.dead_tap_ratio * strongest);
  }

  const std::size_t n_pay = ref.payload.size();
  eq.rows.assign(n_pay, std::vector<cplx>(n_sub));
  eq.cpe_rad.assign(n_pay, 0.0);
  for (std::size_t s = 0; s < n_pay; ++s) {
    const auto& r = raw.rows[n_tr + s];
    if (opt.remove_cpe) {
      cplx acc{};
      for (int p : ref.pilots) {
        const auto pu = static_cast<std::size_t>(p);
        if (eq.dead[pu] || ref.bits[pu] == 0) continue;
        acc += r[pu] * std::conj(eq.taps[pu] * ref.payload[s][pu]);
      }
      eq.cpe_rad[s] = std::abs(acc) > 0.0 ? std::arg(acc) : 0.0;
    }
    const cplx derot = std::polar(1.0, -eq.cpe_rad[s]);
    for (int k : ref.active) {
      const auto ku = static_cast<std::size_t>(k);
      if (!eq.dead[ku]) eq.rows[s][ku] = r[ku] / eq.taps[ku] * derot;
    }
  }
  return eq;
}

struct SubcarrierMetric {
  int index = 0;
  double freq_hz = 0.0;
  double snr_db = 0.0;
  double evm_rms = 0.0;
  int n_symbols = 0;
  bool available = false;
};

struct SubcarrierMetrics {
  std::vector<SubcarrierMetric> items;

  [[nodiscard]] const SubcarrierMetric* find(int index) const {
    for (const auto& m : items)
      if (m.index == index) return &m;
    return nullptr;
  }

  /// Mean of snr_db over available subcarriers (optionally a sorted subset).
  [[nodiscard]] double average_snr_db(const std::vector<int>* subset = nullptr) const {
    double acc = 0.0;
    int n = 0;
    for (const auto& m : items) {
      if (!m.available) continue;
      if (subset && !std::binary_search(subset->begin(), subset->end(), m.index)) continue;
      acc += m.snr_db;
      ++n;
    }
    return n ? acc / n : -std::numeric_limits<double>::infinity();
  }
};

inline constexpr int kMinMetricSymbols = 32;

/**
 * @brief Data-aided EVM and SNR per loaded subcarrier.
 *
 * Each subcarrier's received points are first scaled by the least-squares
 * complex gain onto the transmitted symbols (instrument-style EVM
 * normalization), then evm = sqrt(mean|y - s|^2 / mean|s|^2) and
 * snr_db = -20 log10(evm).
 */
inline SubcarrierMetrics evm_snr(const Equalized& eq, const FrameRef& ref) {
  require(ref.n_payload() >= kMinMetricSymbols,
          "EVM needs at least " + std::to_string(kMinMetricSymbols) + " payload symbols");
  SubcarrierMetrics out;
  for (int k : ref.active) {
    const auto ku = static_cast<std::size_t>(k);
    if (ref.bits[ku] == 0) continue;
    SubcarrierMetric m;
    m.index = k;
    m.freq_hz = subcarrier_center(ref.plan, k);
    m.n_symbols = ref.n_payload();
    m.available = !eq.dead[ku];
    if (!m.available) {
      m.snr_db = m.evm_rms = std::numeric_limits<double>::quiet_NaN();
      out.items.push_back(m);
      continue;
    }
    cplx ys{};
    double ss = 0.0;
    for (std::size_t s = 0; s < eq.rows.size(); ++s) {
      ys += eq.rows[s][ku] * std::conj(ref.payload[s][ku]);
      ss += std::norm(ref.payload[s][ku]);
    }
    const cplx g = ys / ss;
    double err = 0.0;
    for (std::size_t s = 0; s < eq.rows.size(); ++s)
      err += std::norm(eq.rows[s][ku] / g - ref.payload[s][ku]);
    m.evm_rms = std::sqrt(err / ss);
    m.snr_db = -20.0 * std::log10(std::max(m.evm_rms, 1e-300));
    out.items.push_back(m);
  }
  return out;
}

/// Equalized points of one subcarrier, for scatter plots.
inline std::vector<cplx> export_constellation(const Equalized& eq, const FrameRef& ref, int index) {
  require(index >= 0 && index < ref.plan.n_subcarriers, "constellation: index out of range");
  const auto ku = static_cast<std::size_t>(index);
  require(ref.bits[ku] > 0 && !eq.dead[ku], "constellation: subcarrier has no metrics");
  std::vector<cplx> pts;
  pts.reserve(eq.rows.size());
  for (const auto& row : eq.rows) pts.push_back(row[ku]);
  return pts;
}

struct BitErrorCount {
  long long errors = 0;
  long long bits = 0;
  [[nodiscard]] double ber() const { return bits ? static_cast<double>(errors) / bits : 0.0; }
};

/// Hard-decision bit errors over `subset` (all loaded subcarriers if empty).
inline BitErrorCount count_bit_errors(const Equalized& eq, const FrameRef& ref,
                                      const std::vector<int>& subset = {}) {
  const auto& carriers = subset.empty() ? ref.active : subset;
  BitErrorCount c;
  std::vector<std::uint8_t> a, b;
  for (int k : carriers) {
    const auto ku = static_cast<std::size_t>(k);
    const int order = ref.bits[ku];
    if (order == 0) continue;
    for (std::size_t s = 0; s < eq.rows.size(); ++s) {
      a.clear();
      b.clear();
      demap_qam(eq.dead[ku] ? cplx{} : eq.rows[s][ku], order, a);
      demap_qam(ref.payload[s][ku], order, b);
      for (std::size_t i = 0; i < a.size(); ++i) c.errors += a[i] != b[i];
      c.bits += order;
    }
  }
  return c;
}

}  // namespace wdlink
