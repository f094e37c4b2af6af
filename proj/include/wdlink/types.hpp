#pragma once

/**
 * @file types.hpp
 * @brief Value types shared by every stage of the link simulator.
 */

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdlink {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Invalid parameters or a malformed configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The receiver could not find the frame.
class SyncError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

/// Closed frequency interval in Hz.
struct FreqInterval {
  double lo_hz = 0.0;
  double hi_hz = 0.0;

  [[nodiscard]] bool contains(double f) const { return f >= lo_hz && f <= hi_hz; }
  [[nodiscard]] double width() const { return hi_hz - lo_hz; }
  bool operator==(const FreqInterval&) const = default;
};

/**
 * @brief Uniformly sampled complex-baseband signal.
 *
 * Sample zero-frequency corresponds to the absolute frequency
 * `anchor_hz + lo_hz`. `lo_hz` is the local-oscillator frequency already
 * removed by a down-converter, so `anchor_hz` alone is the frequency of
 * baseband zero in the converter's IF frame (for an un-converted RF signal
 * `lo_hz` is 0 and `anchor_hz` is the band center).
 */
struct ComplexWaveform {
  std::vector<cplx> samples;
  double sample_rate_hz = 0.0;
  double anchor_hz = 0.0;
  double lo_hz = 0.0;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double rf_anchor_hz() const { return anchor_hz + lo_hz; }

  [[nodiscard]] double mean_power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : samples) acc += std::norm(s);
    return acc / static_cast<double>(samples.size());
  }

  void scale(double g) {
    for (auto& s : samples) s *= g;
  }
};

/// Sampled phase record (radians), e.g. a laser phase-noise realization.
struct PhaseTrace {
  double sample_rate_hz = 0.0;
  std::vector<double> phases;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const { return phases.size(); }
};

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin_to_db(double lin) { return 10.0 * std::log10(lin); }

/// SplitMix64 finalizer; derives independent stream seeds from one scenario seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace wdlink
