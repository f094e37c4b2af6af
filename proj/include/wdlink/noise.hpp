#pragma once

/**
 * @file noise.hpp
 * @brief Laser phase noise, additive white Gaussian noise and PSD estimation.
 *
 * Lasers are modeled with white frequency noise only: the optical phase is a
 * Wiener process whose increments have variance 2*pi*linewidth/fs, giving a
 * Lorentzian field spectrum with FWHM equal to the linewidth.
 */

#include <array>
#include <optional>
#include <random>
#include <string>

#include "wdlink/fft.hpp"
#include "wdlink/types.hpp"

namespace wdlink {

struct LaserSpec {
  std::string label;
  double linewidth_hz = 0.0;  // Lorentzian FWHM
  double offset_hz = 0.0;     // nominal beat offset from the reference laser

  void validate() const {
    require(std::isfinite(linewidth_hz) && linewidth_hz >= 0.0,
            label + ": linewidth must be finite and non-negative");
    require(std::isfinite(offset_hz), label + ": offset must be finite");
  }
};

/// LD1 (100 Hz reference), LD2 (5 kHz, +92.5 GHz), LD3 (80 kHz, +130 GHz).
inline std::array<LaserSpec, 3> default_lasers() {
  return {LaserSpec{"LD1", 100.0, 0.0}, LaserSpec{"LD2", 5e3, 92.5e9},
          LaserSpec{"LD3", 80e3, 130e9}};
}

inline PhaseTrace gen_phase_noise(const LaserSpec& spec, std::size_t n, double fs,
                                  std::uint64_t seed) {
  spec.validate();
  require(std::isfinite(fs) && fs > 0.0, "sample rate must be positive");
  require(n > 0, "trace length must be positive");

  PhaseTrace t;
  t.sample_rate_hz = fs;
  t.seed = seed;
  t.phases.assign(n, 0.0);
  const double sigma = std::sqrt(kTwoPi * spec.linewidth_hz / fs);
  if (sigma == 0.0) return t;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (std::size_t i = 1; i < n; ++i) t.phases[i] = t.phases[i - 1] + gauss(rng);
  return t;
}

/// Phase of the beat a - b. Independent Lorentzian lasers beat with summed linewidths.
inline PhaseTrace beat_phase(const PhaseTrace& a, const PhaseTrace& b) {
  require(a.size() == b.size(), "beat_phase: trace lengths differ");
  require(a.sample_rate_hz == b.sample_rate_hz, "beat_phase: sample rates differ");
  PhaseTrace out;
  out.sample_rate_hz = a.sample_rate_hz;
  out.seed = a.seed ^ (b.seed << 1);
  out.phases.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.phases[i] = a.phases[i] - b.phases[i];
  return out;
}

/// exp(j*phase) as a complex waveform.
inline ComplexWaveform phase_to_field(const PhaseTrace& t, double anchor_hz = 0.0) {
  ComplexWaveform w;
  w.sample_rate_hz = t.sample_rate_hz;
  w.anchor_hz = anchor_hz;
  w.samples.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) w.samples[i] = std::polar(1.0, t.phases[i]);
  return w;
}

/**
 * @brief Power spectral density estimate.
 *
 * `density` is linear power per Hz. Each output bin covers `width_hz[i]`, so
 * `integrate()` returns the total power. One-sided estimates (real input)
 * fold negative frequencies into the positive ones.
 */
struct Psd {
  std::vector<double> freq_hz;
  std::vector<double> density;
  std::vector<double> width_hz;
  bool one_sided = false;

  [[nodiscard]] std::size_t size() const { return freq_hz.size(); }

  [[nodiscard]] double integrate() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) acc += density[i] * width_hz[i];
    return acc;
  }

  /// Power within [lo, hi] counting every bin whose center falls inside.
  [[nodiscard]] double band_power(double lo, double hi) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i)
      if (freq_hz[i] >= lo && freq_hz[i] <= hi) acc += density[i] * width_hz[i];
    return acc;
  }

  /// Density of the bin nearest to `f`.
  [[nodiscard]] double at(double f) const {
    auto it = std::lower_bound(freq_hz.begin(), freq_hz.end(), f);
    if (it == freq_hz.end()) return density.back();
    auto i = static_cast<std::size_t>(it - freq_hz.begin());
    if (i > 0 && f - freq_hz[i - 1] < freq_hz[i] - f) --i;
    return density[i];
  }
};

namespace detail {

// Fine DFT bins per output bin when the record is long enough.
inline constexpr std::size_t kPsdSubBins = 5;

struct WelchLayout {
  std::size_t out_bins;
  std::size_t sub_bins;
  std::size_t seg_len;
};

inline WelchLayout welch_layout(std::size_t n, double fs, double rbw_hz) {
  require(std::isfinite(rbw_hz) && rbw_hz > 0.0, "resolution bandwidth must be positive");
  require(n > 0, "cannot estimate the PSD of an empty record");
  require(rbw_hz * static_cast<double>(n) >= fs * (1.0 - 1e-9),
          "resolution bandwidth finer than the record length allows");
  WelchLayout l{};
  l.out_bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fs / rbw_hz + 1e-9)));
  l.out_bins = std::min(l.out_bins, n);
  l.sub_bins = std::clamp<std::size_t>(n / l.out_bins, 1, kPsdSubBins);
  l.seg_len = l.sub_bins * l.out_bins;
  return l;
}

/// Averaged Hann-windowed periodograms, 50% overlap. Two-sided density in natural DFT order.
inline std::vector<double> welch_two_sided(std::span<const cplx> x, double fs, std::size_t seg_len,
                                           bool remove_mean) {
  const std::size_t hop = std::max<std::size_t>(1, seg_len / 2);
  std::vector<double> win(seg_len);
  double wss = 0.0;
  for (std::size_t i = 0; i < seg_len; ++i) {
    win[i] = seg_len == 1 ? 1.0 : 0.5 - 0.5 * std::cos(kTwoPi * i / seg_len);
    wss += win[i] * win[i];
  }
  Fft f(seg_len, FftDirection::Forward);
  std::vector<double> acc(seg_len, 0.0);
  std::vector<cplx> seg(seg_len), spec(seg_len);
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg_len <= x.size(); start += hop) {
    cplx mean{};
    if (remove_mean) {
      for (std::size_t i = 0; i < seg_len; ++i) mean += x[start + i];
      mean /= static_cast<double>(seg_len);
    }
    for (std::size_t i = 0; i < seg_len; ++i) seg[i] = (x[start + i] - mean) * win[i];
    f.execute(seg, spec);
    for (std::size_t k = 0; k < seg_len; ++k) acc[k] += std::norm(spec[k]);
    ++count;
  }
  const double norm = 1.0 / (static_cast<double>(count) * fs * wss);
  for (auto& v : acc) v *= norm;
  return acc;
}

}  // namespace detail

/// Two-sided PSD of a complex waveform; frequencies are absolute (RF anchor added).
inline Psd estimate_psd(const ComplexWaveform& w, double rbw_hz) {
  require(w.sample_rate_hz > 0.0, "waveform sample rate must be positive");
  const auto l = detail::welch_layout(w.size(), w.sample_rate_hz, rbw_hz);
  const auto fine = detail::welch_two_sided(w.samples, w.sample_rate_hz, l.seg_len, false);
  const double df = w.sample_rate_hz / static_cast<double>(l.seg_len);
  const std::size_t half = l.seg_len / 2;

  Psd out;
  out.one_sided = false;
  for (std::size_t g = 0; g < l.out_bins; ++g) {
    double dens = 0.0, freq = 0.0;
    for (std::size_t j = 0; j < l.sub_bins; ++j) {
      const std::size_t shifted = g * l.sub_bins + j;  // 0 .. seg_len-1, lowest frequency first
      const std::size_t k = (shifted + l.seg_len - half) % l.seg_len;
      dens += fine[k];
      freq += (static_cast<double>(shifted) - static_cast<double>(half)) * df;
    }
    out.freq_hz.push_back(freq / l.sub_bins + w.rf_anchor_hz());
    out.density.push_back(dens / l.sub_bins);
    out.width_hz.push_back(df * l.sub_bins);
  }
  return out;
}

/// One-sided PSD (rad^2/Hz) of a phase record; each segment's mean phase is removed.
inline Psd estimate_psd(const PhaseTrace& t, double rbw_hz) {
  require(t.sample_rate_hz > 0.0, "trace sample rate must be positive");
  const auto l = detail::welch_layout(t.size(), t.sample_rate_hz, rbw_hz);
  std::vector<cplx> x(t.phases.begin(), t.phases.end());
  const auto fine = detail::welch_two_sided(x, t.sample_rate_hz, l.seg_len, true);
  const double df = t.sample_rate_hz / static_cast<double>(l.seg_len);
  const std::size_t half = l.seg_len / 2;

  std::vector<double> folded(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    const bool self_mirror = (k == 0) || (2 * k == l.seg_len);
    folded[k] = self_mirror ? fine[k] : 2.0 * fine[k];
  }

  Psd out;
  out.one_sided = true;
  for (std::size_t start = 0; start < folded.size(); start += l.sub_bins) {
    const std::size_t end = std::min(folded.size(), start + l.sub_bins);
    double dens = 0.0, freq = 0.0;
    for (std::size_t k = start; k < end; ++k) {
      dens += folded[k];
      freq += static_cast<double>(k) * df;
    }
    const auto cnt = static_cast<double>(end - start);
    out.freq_hz.push_back(freq / cnt);
    out.density.push_back(dens / cnt);
    out.width_hz.push_back(df * cnt);
  }
  return out;
}

/**
 * @brief Adds complex white Gaussian noise.
 *
 * The SNR is the ratio of the signal power to the noise power that falls
 * inside `noise_bandwidth_hz` (defaults to the full sample rate). The signal
 * power is the waveform's mean power unless `signal_power` is given, e.g. when
 * the record contains idle guard samples. A disengaged `snr_db` returns the
 * input unchanged.
 */
inline ComplexWaveform add_awgn(const ComplexWaveform& w, std::optional<double> snr_db,
                                std::uint64_t seed, double noise_bandwidth_hz = 0.0,
                                double signal_power = 0.0) {
  if (!snr_db) return w;
  require(std::isfinite(*snr_db), "SNR must be finite (pass no value for a noiseless link)");
  const double p = signal_power > 0.0 ? signal_power : w.mean_power();
  require(p > 0.0, "add_awgn: signal power must be positive");
  const double bw = noise_bandwidth_hz > 0.0 ? noise_bandwidth_hz : w.sample_rate_hz;
  require(bw <= w.sample_rate_hz * (1.0 + 1e-12), "noise bandwidth exceeds the sample rate");

  const double noise_power = p / db_to_lin(*snr_db) * (w.sample_rate_hz / bw);
  const double sigma = std::sqrt(noise_power / 2.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  ComplexWaveform out = w;
  for (auto& s : out.samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s += cplx(re, im);
  }
  return out;
}

}  // namespace wdlink
