#pragma once

/**
 * @file pipeline.hpp
 * @brief End-to-end chain for one band: lock, transmit, channel, receive, bit loading.
 */

#include <optional>
#include <string>

#include "wdlink/bandplan.hpp"
#include "wdlink/bitload.hpp"
#include "wdlink/channel.hpp"
#include "wdlink/noise.hpp"
#include "wdlink/ofdm_rx.hpp"
#include "wdlink/ofdm_tx.hpp"
#include "wdlink/opll.hpp"

namespace wdlink {

struct BandSetup {
  TxConfig tx;
  LaserSpec slave;
  LoopConfig loop;
  ChannelConfig channel;
  std::optional<DownconverterConfig> downconverter;
  EqualizerOptions equalizer;
  /// Idle samples before and after the frame, so the receiver must search for it.
  std::size_t guard_samples = 64;
  std::uint64_t lock_seed = 1;
  std::uint64_t floor_seed = 2;

  [[nodiscard]] const BandPlan& plan() const { return tx.plan; }

  void validate() const {
    tx.validate();
    slave.validate();
    loop.validate();
    channel.validate(tx.plan);
  }
};

struct LinkSetup {
  LaserSpec master;
  std::vector<BandSetup> bands;
  FecProfile fec;
  double rbw_hz = 100e6;

  void validate() const {
    master.validate();
    fec.validate();
    require(!bands.empty(), "scenario defines no bands");
    require(rbw_hz > 0.0, "rbw must be positive");
    for (const auto& b : bands) b.validate();
  }
};

struct BandResult {
  BandId band = BandId::W;
  LockResult lock;
  double papr_unclipped_db = 0.0;
  double papr_db = 0.0;
  ComplexWaveform tx;  // clipped transmit frame
  ComplexWaveform rx;  // receiver input
  FrameRef ref;
  std::size_t frame_start = 0;  // true frame position in rx
  bool synced = false;
  std::string failure;  // empty on success
  SyncResult sync;
  Equalized eq;
  SubcarrierMetrics metrics;
  BitLoadMap map;
  BandCapacity capacity;
  BitErrorCount errors;
  double average_snr_db = 0.0;

  [[nodiscard]] bool ok() const { return failure.empty(); }
};

/**
 * @brief The reference two-band link.
 *
 * LD2 and LD3 are locked to LD1; both bands carry 16QAM at a 12 dB mean SNR.
 * The D receiver's IF window is placed on the 133-150 GHz detect window.
 */
inline LinkSetup default_link_setup(std::uint64_t seed = 1) {
  const auto lasers = default_lasers();
  const auto [pw, pd] = make_default_plans();
  const auto [mw, md] = default_masks();
  LinkSetup link;
  link.master = lasers[0];
  for (int i = 0; i < 2; ++i) {
    BandSetup b;
    b.tx.plan = i == 0 ? pw : pd;
    b.slave = lasers[static_cast<std::size_t>(i + 1)];
    b.loop = default_loop_config(b.slave.offset_hz - link.master.offset_hz);
    b.channel.mask = i == 0 ? mw : md;
    b.channel.noise_seed = derive_seed(seed, 16 * static_cast<std::uint64_t>(i) + 2);
    b.lock_seed = derive_seed(seed, 16 * static_cast<std::uint64_t>(i) + 1);
    b.floor_seed = derive_seed(seed, 16 * static_cast<std::uint64_t>(i) + 3);
    if (i == 1) {
      DownconverterConfig dc;
      const double lo = dc.lo_hz();
      dc.if_window_hz = {pd.detect_window_hz.lo_hz - lo, pd.detect_window_hz.hi_hz - lo};
      b.downconverter = dc;
    }
    link.bands.push_back(std::move(b));
  }
  return link;
}

/// Transmit side of a band: frame, clipping and optional transmitter error floor.
inline std::pair<ComplexWaveform, FrameRef> transmit(const BandSetup& b, double* papr_unclipped_db = nullptr) {
  auto [w, ref] = build_frame(b.tx);
  if (papr_unclipped_db) *papr_unclipped_db = papr_db(w);
  w = clip(w, b.tx.clip_ratio_db);
  if (b.channel.tx_snr_floor_db) {
    const double occupied = static_cast<double>(ref.active.size()) * b.plan().spacing_hz;
    w = add_awgn(w, b.channel.tx_snr_floor_db, b.floor_seed, occupied);
  }
  return {std::move(w), std::move(ref)};
}

/**
 * @brief Runs one band through the full chain.
 *
 * Lock and sync failures are reported through BandResult::failure; invalid
 * parameters throw ConfigError.
 */
inline BandResult run_band(const LinkSetup& link, std::size_t index) {
  require(index < link.bands.size(), "band index out of range");
  const BandSetup& b = link.bands[index];
  b.validate();
  const BandPlan& plan = b.plan();

  BandResult r;
  r.band = plan.name;
  r.lock = simulate_lock(link.master, b.slave, b.loop, b.lock_seed);
  if (!r.lock.locked) {
    r.failure = "loop failed to lock";
    return r;
  }

  auto [frame, ref] = transmit(b, &r.papr_unclipped_db);
  r.papr_db = papr_db(frame);
  r.tx = frame;
  r.ref = std::move(ref);

  ComplexWaveform w = frame;
  w.samples.assign(b.guard_samples, cplx{});
  w.samples.insert(w.samples.end(), frame.samples.begin(), frame.samples.end());
  w.samples.resize(w.samples.size() + b.guard_samples, cplx{});

  // Residual carrier phase taken from the settled end of the lock record.
  const double span_s = static_cast<double>(w.size()) / w.sample_rate_hz;
  const double start_s = std::min(0.9 * b.loop.duration_s, b.loop.duration_s - span_s - 2.0 / b.loop.sim_rate_hz);
  require(start_s >= 0.0, "loop record shorter than the frame");
  w = apply_carrier(w, resample_phase(r.lock.residual_phase, w.sample_rate_hz, w.size(), start_s));
  w = apply_mask(w, b.channel.mask);

  std::size_t start = b.guard_samples;
  if (b.downconverter) {
    const double rate_in = w.sample_rate_hz;
    w = dband_downconvert(w, *b.downconverter);
    start = static_cast<std::size_t>(std::llround(static_cast<double>(start) * w.sample_rate_hz / rate_in));
  }
  r.frame_start = start;

  // Noise density that puts the dB-average of the detected subcarriers' SNR on target.
  const auto det = detected_indices(plan);
  const auto sub_p = subcarrier_powers(w, start, r.ref.frame_len(w.sample_rate_hz), plan, det);
  double log_acc = 0.0;
  for (double p : sub_p) log_acc += std::log(std::max(p, 1e-300));
  const double geo_mean = std::exp(log_acc / static_cast<double>(sub_p.size()));
  w = add_awgn(w, b.channel.target_snr_db, b.channel.noise_seed, plan.spacing_hz, geo_mean);
  r.rx = w;

  try {
    r.sync = synchronize_detail(w, r.ref);
  } catch (const SyncError& e) {
    r.failure = std::string("sync failed: ") + e.what();
    return r;
  }
  r.synced = true;

  // Sampling half a prefix early keeps the window clear of the next symbol.
  const auto backoff = static_cast<std::ptrdiff_t>(r.ref.cp_len(w.sample_rate_hz) / 2);
  const auto raw = demodulate(w, r.ref, static_cast<std::ptrdiff_t>(r.sync.offset) - backoff);
  r.eq = equalize(raw, r.ref, b.equalizer);
  r.metrics = evm_snr(r.eq, r.ref);
  r.average_snr_db = r.metrics.average_snr_db(&det);
  r.errors = count_bit_errors(r.eq, r.ref, det);
  r.map = load_bits(r.metrics, link.fec, plan);
  r.capacity = capacity(r.map, plan, link.fec, b.tx.cp_fraction);
  return r;
}

}  // namespace wdlink
