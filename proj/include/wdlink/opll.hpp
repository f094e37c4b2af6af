#pragma once

/**
 * @file opll.hpp
 * @brief Offset frequency-locking loop between a reference laser and a tunable laser.
 *
 * The loop is simulated at complex baseband around the target beat offset:
 * the beat is down-converted to an IF by an ideal mixer, a phase-frequency
 * detector (PFD) compares it to the reference, a PI controller drives the
 * slave laser's frequency through a one-pole actuator (the piezo).
 *
 * Units: `kp` is Hz of actuation per radian of phase error and `ki` is Hz per
 * radian-second, so the linearized open-loop gain is
 *
 *     L(s) = 2*pi * (kp + ki/s) / s * 1 / (1 + s / (2*pi*actuator_bw_hz))
 */

#include <algorithm>
#include <complex>

#include "wdlink/noise.hpp"
#include "wdlink/types.hpp"

namespace wdlink {

struct LoopConfig {
  double target_offset_hz = 0.0;
  double if_hz = 20e6;
  double kp = 0.0;
  double ki = 0.0;
  double actuator_bw_hz = 100e3;
  double sim_rate_hz = 50e6;
  double duration_s = 20e-3;
  /// Free-running slave frequency minus the target at t = 0.
  double initial_freq_error_hz = 0.0;
  /// Optional sinusoidal FM on the slave (peak deviation, modulation rate).
  double fm_dev_hz = 0.0;
  double fm_rate_hz = 0.0;

  [[nodiscard]] std::size_t n_steps() const {
    return static_cast<std::size_t>(std::llround(duration_s * sim_rate_hz));
  }

  void validate() const;
};

/// Complex open-loop gain L(j*2*pi*f) of the linearized loop.
inline cplx open_loop_gain(const LoopConfig& cfg, double f_hz) {
  const cplx s(0.0, kTwoPi * f_hz);
  const cplx pi_ctrl = cfg.kp + cfg.ki / s;
  const cplx actuator = 1.0 / (1.0 + s / (kTwoPi * cfg.actuator_bw_hz));
  return kTwoPi * pi_ctrl / s * actuator;
}

/// Frequency where |L| crosses 1, found by bisection on a log grid.
inline double unity_gain_hz(const LoopConfig& cfg) {
  double lo = 1e-3, hi = 1e12;
  if (std::abs(open_loop_gain(cfg, lo)) < 1.0) return 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (std::abs(open_loop_gain(cfg, mid)) > 1.0 ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

/// Phase margin in degrees at the unity-gain frequency.
inline double phase_margin_deg(const LoopConfig& cfg) {
  const double fc = unity_gain_hz(cfg);
  return 180.0 + std::arg(open_loop_gain(cfg, fc)) * 180.0 / kPi;
}

inline void LoopConfig::validate() const {
  require(std::isfinite(target_offset_hz), "loop: target offset must be finite");
  require(if_hz > 0.0 && if_hz < 50e6, "loop: IF must lie in (0, 50 MHz)");
  require(kp >= 0.0 && ki >= 0.0 && (kp > 0.0 || ki > 0.0),
          "loop: slave needs tuning authority (kp or ki > 0)");
  require(actuator_bw_hz > 0.0, "loop: actuator bandwidth must be positive");
  require(duration_s > 0.0 && sim_rate_hz > 0.0, "loop: duration and rate must be positive");
  require(std::isfinite(initial_freq_error_hz), "loop: initial frequency error must be finite");
  require(fm_dev_hz >= 0.0 && fm_rate_hz >= 0.0, "loop: FM injection must be non-negative");
  require(sim_rate_hz >= 20.0 * unity_gain_hz(*this),
          "loop: simulation rate must be at least 20x the loop bandwidth");
}

/**
 * @brief PI gains giving unity loop gain at `crossover_hz` with the PI zero at `pi_zero_hz`.
 */
inline LoopConfig tuned_loop_config(double target_offset_hz, double crossover_hz, double pi_zero_hz,
                                    double actuator_bw_hz) {
  require(crossover_hz > 0.0 && pi_zero_hz >= 0.0 && actuator_bw_hz > 0.0,
          "loop tuning frequencies must be positive");
  LoopConfig cfg;
  cfg.target_offset_hz = target_offset_hz;
  cfg.actuator_bw_hz = actuator_bw_hz;
  // |L(fc)| = kp * |1 + fz/(j fc)| / (fc * |1 + j fc/fa|) = 1
  const double pi_mag = std::hypot(1.0, pi_zero_hz / crossover_hz);
  const double act_mag = std::hypot(1.0, crossover_hz / actuator_bw_hz);
  cfg.kp = crossover_hz * act_mag / pi_mag;
  cfg.ki = cfg.kp * kTwoPi * pi_zero_hz;
  return cfg;
}

/**
 * @brief Loop tuned for a 100 kHz unity-gain frequency with a 100 kHz piezo pole.
 *
 * The PI zero sits a decade below crossover. With the actuator pole at the
 * crossover frequency this yields about 39 degrees of phase margin.
 */
inline LoopConfig default_loop_config(double target_offset_hz) {
  return tuned_loop_config(target_offset_hz, 100e3, 10e3, 100e3);
}

/// |1 / (1 + L(j 2 pi f))|^2 in dB: phase-noise suppression of the small-signal loop.
inline double closed_loop_suppression(const LoopConfig& cfg, double f_hz) {
  require(f_hz > 0.0, "suppression frequency must be positive");
  const cplx e = 1.0 / (1.0 + open_loop_gain(cfg, f_hz));
  return lin_to_db(std::norm(e));
}

struct LockResult {
  PhaseTrace phase_error;          // PFD output state, within (-2pi, 2pi)
  PhaseTrace residual_phase;       // unwrapped beat phase relative to the target offset
  std::vector<double> freq_error;  // beat frequency minus target, per step (Hz)
  ComplexWaveform locked_beat;     // exp(j * residual), anchored at the IF
  bool locked = false;
  bool diverged = false;
  std::size_t cycle_slips = 0;
};

namespace detail {
inline constexpr double kDivergencePhase = 1e4;

inline std::pair<PhaseTrace, PhaseTrace> laser_pair_phases(const LaserSpec& master,
                                                           const LaserSpec& slave, std::size_t n,
                                                           double fs, std::uint64_t seed) {
  return {gen_phase_noise(master, n, fs, derive_seed(seed, 0)),
          gen_phase_noise(slave, n, fs, derive_seed(seed, 1))};
}
}  // namespace detail

inline LockResult simulate_lock(const LaserSpec& master, const LaserSpec& slave,
                                const LoopConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = cfg.n_steps();
  require(n >= 16, "loop: simulation too short");
  const double fs = cfg.sim_rate_hz;
  const double dt = 1.0 / fs;
  const auto [pm, ps] = detail::laser_pair_phases(master, slave, n, fs, seed);

  LockResult r;
  r.phase_error.sample_rate_hz = fs;
  r.phase_error.seed = seed;
  r.phase_error.phases.resize(n);
  r.residual_phase.sample_rate_hz = fs;
  r.residual_phase.seed = seed;
  r.residual_phase.phases.resize(n);
  r.freq_error.resize(n);

  const double alpha = 1.0 - std::exp(-kTwoPi * cfg.actuator_bw_hz * dt);
  double psi = 0.0;  // phase accumulated from the slave's frequency error
  double pfd = 0.0;
  double integ = 0.0;
  double actuation = 0.0;
  double prev_theta = ps.phases[0] - pm.phases[0];
  pfd = prev_theta;

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double theta = ps.phases[i] - pm.phases[i] + psi;

    // PFD: linear within (-2pi, 2pi); beyond that it slips a cycle and keeps
    // the sign, which is what gives it frequency-detection capability.
    if (i > 0) pfd += theta - prev_theta;
    while (pfd >= kTwoPi) {
      pfd -= kTwoPi;
      ++r.cycle_slips;
    }
    while (pfd <= -kTwoPi) {
      pfd += kTwoPi;
      ++r.cycle_slips;
    }
    prev_theta = theta;

    integ += pfd * dt;
    const double ctrl = cfg.kp * pfd + cfg.ki * integ;
    actuation += alpha * (ctrl - actuation);

    const double fm = cfg.fm_dev_hz > 0.0 ? cfg.fm_dev_hz * std::sin(kTwoPi * cfg.fm_rate_hz * t)
                                          : 0.0;
    const double ferr = cfg.initial_freq_error_hz + fm - actuation;
    r.phase_error.phases[i] = pfd;
    r.residual_phase.phases[i] = theta;
    r.freq_error[i] = i > 0 ? (theta - r.residual_phase.phases[i - 1]) / (kTwoPi * dt) : ferr;
    if (std::abs(theta) > detail::kDivergencePhase) r.diverged = true;
    psi += kTwoPi * ferr * dt;
  }

  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double mean = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) mean += r.freq_error[i];
  mean /= static_cast<double>(tail);
  r.locked = !r.diverged && std::abs(mean) < 1e3;

  r.locked_beat = phase_to_field(r.residual_phase, cfg.if_hz);
  r.locked_beat.lo_hz = cfg.target_offset_hz - cfg.if_hz;
  return r;
}

/// Beat field of the two lasers with no loop, anchored at the nominal offset.
inline ComplexWaveform free_running_beat(const LaserSpec& master, const LaserSpec& slave,
                                         std::size_t n, double fs, std::uint64_t seed) {
  const auto [pm, ps] = detail::laser_pair_phases(master, slave, n, fs, seed);
  return phase_to_field(beat_phase(ps, pm), slave.offset_hz - master.offset_hz);
}

/// Phase of the free-running beat (the open-loop counterpart of LockResult::residual_phase).
inline PhaseTrace free_running_phase(const LaserSpec& master, const LaserSpec& slave,
                                     std::size_t n, double fs, std::uint64_t seed) {
  const auto [pm, ps] = detail::laser_pair_phases(master, slave, n, fs, seed);
  return beat_phase(ps, pm);
}

struct ServoBump {
  bool found = false;
  double freq_hz = 0.0;
  double peak_db = 0.0;  // peak density relative to the density at the search floor
};

/**
 * @brief Locates the servo bump in a phase or field PSD.
 *
 * Searches offsets in [lo_hz, hi_hz] on both sides of the carrier, averaging
 * mirror bins and smoothing over a few bins. A bump is reported only if the
 * maximum is interior and at least 1 dB above the density at `lo_hz`.
 */
inline ServoBump find_servo_bump(const Psd& psd, double carrier_hz, double lo_hz, double hi_hz) {
  std::vector<std::pair<double, double>> pts;  // (offset, density)
  for (std::size_t i = 0; i < psd.size(); ++i) {
    const double off = psd.freq_hz[i] - carrier_hz;
    if (off >= lo_hz && off <= hi_hz) {
      double d = psd.density[i];
      if (!psd.one_sided) d = 0.5 * (d + psd.at(carrier_hz - off));
      pts.emplace_back(off, d);
    }
  }
  ServoBump b;
  if (pts.size() < 5) return b;
  std::vector<double> smooth(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::size_t a = i >= 2 ? i - 2 : 0;
    const std::size_t e = std::min(pts.size(), i + 3);
    double acc = 0.0;
    for (std::size_t j = a; j < e; ++j) acc += pts[j].second;
    smooth[i] = acc / static_cast<double>(e - a);
  }
  const auto it = std::max_element(smooth.begin(), smooth.end());
  const auto idx = static_cast<std::size_t>(it - smooth.begin());
  b.freq_hz = pts[idx].first;
  b.peak_db = lin_to_db(*it / smooth.front());
  b.found = idx > 2 && idx + 3 < smooth.size() && b.peak_db > 1.0;
  return b;
}

}  // namespace wdlink
