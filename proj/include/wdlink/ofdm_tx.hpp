#pragma once

/**
 * @file ofdm_tx.hpp
 * @brief OFDM transmitter: PRBS source, QAM loading, IDFT + cyclic prefix, clipping.
 *
 * Frame layout: `n_training` known QPSK symbols on every non-null subcarrier,
 * then `n_symbols` payload symbols. Subcarrier k occupies DFT bin k - N/2, and
 * the whole frame is shifted by half a subcarrier spacing so that subcarrier
 * frequencies are symmetric about the band center (no DC subcarrier).
 */

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>

#include "wdlink/bandplan.hpp"
#include "wdlink/fft.hpp"
#include "wdlink/qam.hpp"
#include "wdlink/types.hpp"

namespace wdlink {

/// Fibonacci LFSR with a primitive trinomial x^order + x^tap + 1.
class Prbs {
 public:
  Prbs(int order, std::uint32_t seed_state) : order_(order) {
    static const std::map<int, int> taps{{7, 6},   {9, 5},   {11, 9}, {15, 14},
                                         {17, 14}, {23, 18}, {31, 28}};
    const auto it = taps.find(order);
    require(it != taps.end(), "unsupported PRBS order " + std::to_string(order));
    tap_ = it->second;
    mask_ = order == 32 ? 0xFFFFFFFFu : ((1u << order) - 1u);
    state_ = seed_state & mask_;
    require(state_ != 0, "PRBS seed state must be nonzero");
  }

  std::uint8_t next() {
    const std::uint32_t out = ((state_ >> (order_ - 1)) ^ (state_ >> (tap_ - 1))) & 1u;
    state_ = ((state_ << 1) | out) & mask_;
    return static_cast<std::uint8_t>(out);
  }

  [[nodiscard]] std::uint64_t period() const { return (1ULL << order_) - 1ULL; }
  [[nodiscard]] std::uint32_t state() const { return state_; }

 private:
  int order_;
  int tap_ = 0;
  std::uint32_t mask_ = 0;
  std::uint32_t state_ = 0;
};

inline std::vector<std::uint8_t> gen_prbs(int order, std::size_t n_bits, std::uint32_t seed_state) {
  Prbs p(order, seed_state);
  std::vector<std::uint8_t> out(n_bits);
  for (auto& b : out) b = p.next();
  return out;
}

struct TxConfig {
  BandPlan plan;
  BitLoadMap bits;  // empty -> uniform `uniform_order` on every non-null subcarrier
  int uniform_order = 4;
  int n_symbols = 64;
  double cp_fraction = 1.0 / 64.0;
  double clip_ratio_db = 10.0;
  int oversample = 2;
  int prbs_order = 17;
  std::uint32_t seed = 0x1FFFF;
  int n_training = 4;
  int n_pilots = 8;

  void validate() const {
    plan.validate();
    require(cp_fraction >= 0.0 && cp_fraction < 0.5, "cp_fraction must lie in [0, 0.5)");
    require(oversample >= 1, "oversample must be >= 1");
    require(clip_ratio_db > 0.0, "clip ratio must be positive");
    require(n_symbols >= 1, "need at least one payload symbol");
    require(n_training >= 1, "need at least one training symbol");
    require(n_pilots >= 1, "need at least one pilot");
    require(bits.size() == 0 || bits.size() == static_cast<std::size_t>(plan.n_subcarriers),
            "bit-load map size must match the subcarrier count");
    for (int b : bits.bits) require(b == 0 || is_supported_order(b), "unsupported order in map");
    if (bits.size() == 0) require(is_supported_order(uniform_order), "unsupported uniform order");
  }

  [[nodiscard]] double sample_rate_hz() const { return plan.span_hz() * oversample; }
};

/// What the receiver knows about a transmitted frame.
struct FrameRef {
  BandPlan plan;
  int oversample = 1;
  double cp_fraction = 0.0;
  double tx_scale = 1.0;  // time samples = tx_scale * unnormalized IDFT
  std::vector<int> bits;         // per subcarrier
  std::vector<int> active;       // non-null subcarriers (training carriers)
  std::vector<int> pilots;       // subset of the detected subcarriers
  std::vector<int> sync_carriers;
  std::vector<std::vector<cplx>> training;  // [symbol][subcarrier]
  std::vector<std::vector<cplx>> payload;   // [symbol][subcarrier]

  [[nodiscard]] int n_training() const { return static_cast<int>(training.size()); }
  [[nodiscard]] int n_payload() const { return static_cast<int>(payload.size()); }

  [[nodiscard]] std::size_t fft_size(double fs) const {
    const double n = fs / plan.spacing_hz;
    const auto r = std::llround(n);
    require(r >= plan.n_subcarriers && std::abs(n - r) < 1e-6,
            "sample rate is not an integer multiple of the subcarrier spacing");
    return static_cast<std::size_t>(r);
  }

  [[nodiscard]] std::size_t cp_len(double fs) const {
    const double c = fft_size(fs) * cp_fraction;
    const auto r = std::llround(c);
    require(std::abs(c - r) < 1e-6, "cyclic prefix is not an integer number of samples");
    return static_cast<std::size_t>(r);
  }

  [[nodiscard]] std::size_t symbol_len(double fs) const { return fft_size(fs) + cp_len(fs); }

  [[nodiscard]] std::size_t frame_len(double fs) const {
    return symbol_len(fs) * static_cast<std::size_t>(n_training() + n_payload());
  }

  /// Baseband frequency of the grid's bin 0 relative to the waveform's zero frequency.
  [[nodiscard]] double grid_offset_hz(double rf_anchor_hz) const {
    return plan.center_hz - rf_anchor_hz + plan.spacing_hz / 2.0;
  }
};

namespace detail {

inline std::size_t subcarrier_bin(int k, int n_sub, std::size_t n_fft) {
  const long long m = k - n_sub / 2;
  return static_cast<std::size_t>((m + static_cast<long long>(n_fft)) % static_cast<long long>(n_fft));
}

inline std::vector<int> spread_pick(const std::vector<int>& from, int count) {
  std::vector<int> out;
  if (from.empty()) return out;
  const auto n = static_cast<int>(from.size());
  count = std::min(count, n);
  for (int i = 0; i < count; ++i) {
    const int pos = static_cast<int>((i + 0.5) * n / count);
    out.push_back(from[static_cast<std::size_t>(std::min(pos, n - 1))]);
  }
  return out;
}

}  // namespace detail

/**
 * @brief Time-domain OFDM symbols for the given frequency-domain rows.
 *
 * Only subcarriers in `carriers` are placed; everything else is zero. The
 * returned samples include each symbol's cyclic prefix and the half-spacing
 * frequency offset referenced to the first returned sample.
 */
inline std::vector<cplx> modulate_symbols(const FrameRef& ref,
                                          const std::vector<std::vector<cplx>>& rows,
                                          const std::vector<int>& carriers, double fs,
                                          double rf_anchor_hz) {
  const std::size_t n_fft = ref.fft_size(fs);
  const std::size_t cp = ref.cp_len(fs);
  Fft ifft_plan(n_fft, FftDirection::Inverse);
  std::vector<cplx> spec(n_fft), sym(n_fft), out;
  out.reserve(rows.size() * (n_fft + cp));
  for (const auto& row : rows) {
    std::fill(spec.begin(), spec.end(), cplx{});
    for (int k : carriers)
      spec[detail::subcarrier_bin(k, ref.plan.n_subcarriers, n_fft)] = row[static_cast<std::size_t>(k)];
    ifft_plan.execute(spec, sym);
    out.insert(out.end(), sym.end() - static_cast<std::ptrdiff_t>(cp), sym.end());
    out.insert(out.end(), sym.begin(), sym.end());
  }
  const double shift = ref.grid_offset_hz(rf_anchor_hz);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= ref.tx_scale * std::polar(1.0, kTwoPi * shift * static_cast<double>(i) / fs);
  return out;
}

inline std::pair<ComplexWaveform, FrameRef> build_frame(const TxConfig& cfg) {
  cfg.validate();
  const auto& plan = cfg.plan;
  const auto n_sub = static_cast<std::size_t>(plan.n_subcarriers);

  FrameRef ref;
  ref.plan = plan;
  ref.oversample = cfg.oversample;
  ref.cp_fraction = cfg.cp_fraction;
  ref.active = data_indices(plan);
  ref.bits.assign(n_sub, 0);
  for (int k : ref.active)
    ref.bits[static_cast<std::size_t>(k)] =
        cfg.bits.size() ? cfg.bits.bits[static_cast<std::size_t>(k)] : cfg.uniform_order;
  ref.sync_carriers = detected_indices(plan);
  if (ref.sync_carriers.empty()) ref.sync_carriers = ref.active;
  ref.pilots = detail::spread_pick(ref.sync_carriers, cfg.n_pilots);

  // Bits wrap around the PRBS period when the frame needs more than one.
  Prbs prbs(cfg.prbs_order, cfg.seed);
  std::vector<std::uint8_t> scratch;
  auto draw = [&](int order) {
    scratch.resize(static_cast<std::size_t>(order));
    for (auto& b : scratch) b = prbs.next();
    return constellation(order).points[pack_label(scratch)];
  };

  ref.training.assign(static_cast<std::size_t>(cfg.n_training), std::vector<cplx>(n_sub));
  for (auto& row : ref.training)
    for (int k : ref.active) row[static_cast<std::size_t>(k)] = draw(2);
  ref.payload.assign(static_cast<std::size_t>(cfg.n_symbols), std::vector<cplx>(n_sub));
  for (auto& row : ref.payload)
    for (int k : ref.active)
      if (const int b = ref.bits[static_cast<std::size_t>(k)]; b > 0)
        row[static_cast<std::size_t>(k)] = draw(b);

  const double fs = cfg.sample_rate_hz();
  std::vector<std::vector<cplx>> rows = ref.training;
  rows.insert(rows.end(), ref.payload.begin(), ref.payload.end());

  ComplexWaveform w;
  w.sample_rate_hz = fs;
  w.anchor_hz = plan.center_hz;
  ref.tx_scale = 1.0;
  w.samples = modulate_symbols(ref, rows, ref.active, fs, w.rf_anchor_hz());
  const double rms = std::sqrt(w.mean_power());
  require(rms > 0.0, "frame carries no energy");
  ref.tx_scale = 1.0 / rms;
  w.scale(ref.tx_scale);
  return {std::move(w), std::move(ref)};
}

/// Limits |x| to RMS * 10^(ratio_db/20), preserving phase.
inline ComplexWaveform clip(const ComplexWaveform& w, double ratio_db) {
  require(ratio_db > 0.0, "clip ratio must be positive");
  const double a = std::sqrt(w.mean_power()) * std::pow(10.0, ratio_db / 20.0);
  ComplexWaveform out = w;
  for (auto& s : out.samples) {
    const double m = std::abs(s);
    if (m > a) s *= a / m;
  }
  return out;
}

inline double papr_db(std::span<const cplx> x) {
  double peak = 0.0, acc = 0.0;
  for (const auto& s : x) {
    peak = std::max(peak, std::norm(s));
    acc += std::norm(s);
  }
  require(acc > 0.0, "PAPR of an all-zero waveform is undefined");
  return lin_to_db(peak / (acc / static_cast<double>(x.size())));
}

inline double papr_db(const ComplexWaveform& w) { return papr_db(w.samples); }

}  // namespace wdlink
