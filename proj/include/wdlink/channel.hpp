#pragma once

/**
 * @file channel.hpp
 * @brief Link impairments between the transmit and receive DSP.
 *
 * Everything runs at complex baseband; absolute frequencies are bookkeeping
 * carried by ComplexWaveform::rf_anchor_hz().
 */

#include <fstream>
#include <optional>
#include <sstream>

#include "wdlink/bandplan.hpp"
#include "wdlink/fft.hpp"
#include "wdlink/noise.hpp"
#include "wdlink/types.hpp"

namespace wdlink {

struct MaskPoint {
  double freq_hz = 0.0;
  double gain_db = 0.0;
};

/// Piecewise-linear magnitude response in dB over absolute frequency; edge values are held.
class BandMask {
 public:
  BandMask() = default;
  explicit BandMask(std::vector<MaskPoint> pts) : pts_(std::move(pts)) { validate(); }

  [[nodiscard]] const std::vector<MaskPoint>& points() const { return pts_; }
  [[nodiscard]] double min_hz() const { return pts_.front().freq_hz; }
  [[nodiscard]] double max_hz() const { return pts_.back().freq_hz; }

  [[nodiscard]] double gain_db(double f) const {
    if (f <= pts_.front().freq_hz) return pts_.front().gain_db;
    if (f >= pts_.back().freq_hz) return pts_.back().gain_db;
    const auto it = std::upper_bound(pts_.begin(), pts_.end(), f,
                                     [](double v, const MaskPoint& p) { return v < p.freq_hz; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double t = (f - a.freq_hz) / (b.freq_hz - a.freq_hz);
    return a.gain_db + t * (b.gain_db - a.gain_db);
  }

  [[nodiscard]] bool covers(double lo, double hi) const { return min_hz() <= lo && max_hz() >= hi; }

  /// Two columns: freq_hz, gain_db. A non-numeric first line is taken as a header.
  static BandMask from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mask file " + path);
    std::vector<MaskPoint> pts;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ss(line);
      MaskPoint p;
      if (!(ss >> p.freq_hz >> p.gain_db)) {
        if (pts.empty() && lineno == 1) continue;
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'freq_hz,gain_db'");
      }
      pts.push_back(p);
    }
    return BandMask(std::move(pts));
  }

 private:
  void validate() const {
    require(pts_.size() >= 2, "mask needs at least two points");
    for (std::size_t i = 1; i < pts_.size(); ++i)
      require(pts_[i].freq_hz > pts_[i - 1].freq_hz, "mask frequencies must strictly increase");
    for (const auto& p : pts_)
      require(std::isfinite(p.freq_hz) && std::isfinite(p.gain_db), "mask values must be finite");
  }

  std::vector<MaskPoint> pts_;
};

/**
 * W: flat 75-100 GHz, then a 10 dB linear-in-dB roll-off to 110 GHz.
 * D: -60 dB below 133 GHz (10 MHz transition), flat to 147 GHz, then down to -20 dB at 150 GHz.
 */
inline std::pair<BandMask, BandMask> default_masks() {
  BandMask w({{75e9, 0.0}, {100e9, 0.0}, {110e9, -10.0}});
  BandMask d({{110e9, -60.0}, {132.99e9, -60.0}, {133e9, 0.0}, {147e9, 0.0}, {150e9, -20.0}});
  return {w, d};
}

/// Linear interpolation of `t` onto `n` samples at `fs`, starting `start_s` into the trace.
inline PhaseTrace resample_phase(const PhaseTrace& t, double fs, std::size_t n, double start_s) {
  require(t.size() >= 2 && t.sample_rate_hz > 0.0, "resample: source trace too short");
  require(fs > 0.0 && start_s >= 0.0, "resample: invalid target rate or start");
  const double last = static_cast<double>(t.size() - 1);
  const double end_pos = start_s * t.sample_rate_hz + static_cast<double>(n - 1) * t.sample_rate_hz / fs;
  require(end_pos <= last, "resample: trace shorter than the requested span");
  PhaseTrace out;
  out.sample_rate_hz = fs;
  out.seed = t.seed;
  out.phases.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = start_s * t.sample_rate_hz + static_cast<double>(i) * t.sample_rate_hz / fs;
    const auto j = std::min(static_cast<std::size_t>(pos), t.size() - 2);
    const double frac = pos - static_cast<double>(j);
    out.phases[i] = t.phases[j] + frac * (t.phases[j + 1] - t.phases[j]);
  }
  return out;
}

/// Multiplies by exp(j * residual): heterodyne mixing with the locked beat's residual phase.
inline ComplexWaveform apply_carrier(const ComplexWaveform& w, const PhaseTrace& residual) {
  require(residual.size() == w.size(), "apply_carrier: residual length differs from waveform");
  require(std::abs(residual.sample_rate_hz - w.sample_rate_hz) <= 1e-9 * w.sample_rate_hz,
          "apply_carrier: residual must be resampled to the waveform rate");
  ComplexWaveform out = w;
  for (std::size_t i = 0; i < w.size(); ++i) out.samples[i] *= std::polar(1.0, residual.phases[i]);
  return out;
}

/// Whole-frame frequency-domain filter with the mask's amplitude (zero phase).
inline ComplexWaveform apply_mask(const ComplexWaveform& w, const BandMask& mask) {
  require(!w.samples.empty(), "apply_mask: empty waveform");
  const double lo = w.rf_anchor_hz() - w.sample_rate_hz / 2.0;
  const double hi = w.rf_anchor_hz() + w.sample_rate_hz / 2.0;
  require(mask.max_hz() >= lo && mask.min_hz() <= hi,
          "apply_mask: mask does not overlap the waveform band");
  const std::size_t n = w.size();
  auto spec = fft(w.samples);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = w.rf_anchor_hz() + bin_frequency(k, n, w.sample_rate_hz);
    spec[k] *= std::pow(10.0, mask.gain_db(f) / 20.0);
  }
  ComplexWaveform out = w;
  out.samples = ifft(spec);
  return out;
}

struct DownconverterConfig {
  double seed_lo_hz = 21.7e9;
  int multiplier = 6;
  FreqInterval if_window_hz{0.5e9, 17e9};

  [[nodiscard]] double lo_hz() const { return seed_lo_hz * multiplier; }
};

/**
 * @brief D-band receiver mixer with a multiplied LO.
 *
 * Re-anchors the waveform to the IF frame, keeps only content inside the IF
 * window (brick wall, half-open at the top) and decimates by the largest power
 * of two that still holds the window.
 */
inline ComplexWaveform dband_downconvert(const ComplexWaveform& w, const DownconverterConfig& dc = {}) {
  require(dc.multiplier >= 1 && dc.seed_lo_hz > 0.0, "downconvert: invalid LO");
  require(dc.if_window_hz.lo_hz < dc.if_window_hz.hi_hz, "downconvert: empty IF window");
  const double lo = dc.lo_hz();
  const double anchor = w.anchor_hz - lo;  // IF of baseband zero
  const double fs = w.sample_rate_hz;
  const double bb_lo = dc.if_window_hz.lo_hz - anchor;
  const double bb_hi = dc.if_window_hz.hi_hz - anchor;
  require(bb_lo >= -fs / 2.0 && bb_hi <= fs / 2.0, "downconvert: IF window outside waveform support");

  const std::size_t n = w.size();
  std::size_t dec = 1;
  while (n % (dec * 2) == 0 && bb_lo >= -fs / (4.0 * dec) && bb_hi <= fs / (4.0 * dec)) dec *= 2;
  const std::size_t m = n / dec;

  const auto spec = fft(w.samples);
  std::vector<cplx> out_spec(m);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = bin_frequency(k, n, fs);
    if (f < bb_lo || f >= bb_hi) continue;
    const auto kk = static_cast<long long>(std::llround(f / fs * static_cast<double>(n)));
    const auto mm = static_cast<long long>(m);
    out_spec[static_cast<std::size_t>((kk % mm + mm) % mm)] = spec[k];
  }
  ComplexWaveform out;
  out.sample_rate_hz = fs / static_cast<double>(dec);
  out.anchor_hz = anchor;
  out.lo_hz = w.lo_hz + lo;
  out.samples = ifft(out_spec);
  for (auto& s : out.samples) s /= static_cast<double>(dec);
  return out;
}

/**
 * @brief Power carried by each listed subcarrier in samples [start, start + len).
 *
 * Sums the periodogram over each subcarrier's spacing-wide slot, so the
 * values add up to the segment's mean power when the slots tile the spectrum.
 */
inline std::vector<double> subcarrier_powers(const ComplexWaveform& w, std::size_t start,
                                             std::size_t len, const BandPlan& plan,
                                             const std::vector<int>& indices) {
  require(len > 0 && start + len <= w.size(), "subcarrier_powers: segment outside the waveform");
  const auto spec = fft(std::span<const cplx>(w.samples).subspan(start, len));
  const double lo = plan.lower_edge_hz();
  std::vector<double> slot(static_cast<std::size_t>(plan.n_subcarriers), 0.0);
  const double norm = 1.0 / (static_cast<double>(len) * static_cast<double>(len));
  for (std::size_t k = 0; k < len; ++k) {
    const double f = w.rf_anchor_hz() + bin_frequency(k, len, w.sample_rate_hz);
    const double pos = std::floor((f - lo) / plan.spacing_hz);
    if (pos < 0.0 || pos >= plan.n_subcarriers) continue;
    slot[static_cast<std::size_t>(pos)] += std::norm(spec[k]) * norm;
  }
  std::vector<double> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(slot.at(static_cast<std::size_t>(i)));
  return out;
}

inline double free_space_path_loss_db(double freq_hz, double distance_m) {
  require(freq_hz > 0.0 && distance_m > 0.0, "path loss needs positive frequency and distance");
  return 20.0 * std::log10(4.0 * kPi * distance_m * freq_hz / kSpeedOfLight);
}

struct LinkBudget {
  double fspl_db = 0.0;
  double net_loss_db = 0.0;  // path loss minus both antenna gains
  double snr_db = 0.0;
};

/// Friis budget: received power against noise_floor_dbm_hz integrated over bandwidth_hz.
inline LinkBudget link_snr_budget(double freq_hz, double distance_m,
                                  std::pair<double, double> gains_dbi, double tx_power_dbm,
                                  double noise_floor_dbm_hz, double bandwidth_hz) {
  require(bandwidth_hz > 0.0, "link budget needs a positive bandwidth");
  LinkBudget b;
  b.fspl_db = free_space_path_loss_db(freq_hz, distance_m);
  b.net_loss_db = b.fspl_db - gains_dbi.first - gains_dbi.second;
  const double rx_dbm = tx_power_dbm - b.net_loss_db;
  b.snr_db = rx_dbm - (noise_floor_dbm_hz + 10.0 * std::log10(bandwidth_hz));
  return b;
}

struct ChannelConfig {
  BandMask mask;
  /// Mean over detected subcarriers of the per-subcarrier SNR in dB; nullopt: noiseless.
  std::optional<double> target_snr_db = 12.0;
  std::optional<double> tx_snr_floor_db;  // transmitter error floor, nullopt: none
  double distance_m = 0.12;
  double antenna_gain_dbi = 20.0;
  std::uint64_t noise_seed = 1;

  void validate(const BandPlan& plan) const {
    require(mask.points().size() >= 2, "channel: mask missing");
    require(mask.covers(plan.lower_edge_hz() + 1.0, plan.upper_edge_hz() - 1.0),
            "channel: mask must cover the band span");
    if (target_snr_db) require(std::isfinite(*target_snr_db), "channel: target SNR must be finite");
    if (tx_snr_floor_db) require(std::isfinite(*tx_snr_floor_db), "channel: tx floor must be finite");
    require(distance_m > 0.0, "channel: distance must be positive");
  }
};

}  // namespace wdlink
