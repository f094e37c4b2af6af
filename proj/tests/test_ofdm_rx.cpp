#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "wdlink/channel.hpp"
#include "wdlink/noise.hpp"
#include "wdlink/ofdm_rx.hpp"
#include "wdlink/ofdm_tx.hpp"

using namespace wdlink;

namespace {
TxConfig tx_for(BandId b) {
  TxConfig cfg;
  const auto [w, d] = make_default_plans();
  cfg.plan = b == BandId::W ? w : d;
  return cfg;
}

ComplexWaveform pad(const ComplexWaveform& w, std::size_t before, std::size_t after) {
  ComplexWaveform out = w;
  out.samples.assign(before, cplx{});
  out.samples.insert(out.samples.end(), w.samples.begin(), w.samples.end());
  out.samples.resize(out.samples.size() + after, cplx{});
  return out;
}

Equalized receive(const ComplexWaveform& w, const FrameRef& ref, std::size_t offset,
                  EqualizerOptions opt = {}) {
  return equalize(demodulate(w, ref, static_cast<std::ptrdiff_t>(offset)), ref, opt);
}
}  // namespace

TEST(OfdmRx, NoiselessLoopbackIsErrorFree) {
  for (BandId b : {BandId::W, BandId::D}) {
    auto cfg = tx_for(b);
    cfg.uniform_order = 6;
    cfg.n_symbols = 72;
    const auto [w, ref] = build_frame(cfg);
    const auto rx = pad(w, 100, 50);
    const auto sync = synchronize_detail(rx, ref);
    EXPECT_EQ(sync.offset, 100u);
    // the reference holds only the detected subcarriers
    const double share = static_cast<double>(ref.sync_carriers.size()) / static_cast<double>(ref.active.size());
    EXPECT_NEAR(sync.correlation, std::sqrt(share), 5e-3);
    const auto eq = receive(rx, ref, sync.offset);
    const auto errors = count_bit_errors(eq, ref);
    EXPECT_EQ(errors.errors, 0);
    EXPECT_GE(errors.bits, 100000);
    for (const auto& m : evm_snr(eq, ref).items) EXPECT_GT(m.snr_db, 100.0);
  }
}

TEST(OfdmRx, SyncFindsRandomOffsetsUnderNoise) {
  std::mt19937 rng(6);
  auto cfg = tx_for(BandId::W);
  cfg.n_symbols = 32;
  const auto [w, ref] = build_frame(cfg);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t before = std::uniform_int_distribution<std::size_t>(0, 3000)(rng);
    auto rx = pad(w, before, 200);
    rx = add_awgn(rx, 5.0, rng());
    for (auto& s : rx.samples) s *= std::polar(1.0, 1.3);  // carrier phase must not matter
    EXPECT_EQ(synchronize(rx, ref), before);
  }
}

TEST(OfdmRx, SyncRejectsNoiseAndShortRecords) {
  const auto [w, ref] = build_frame(tx_for(BandId::W));
  ComplexWaveform noise = w;
  std::fill(noise.samples.begin(), noise.samples.end(), cplx{});
  noise = add_awgn(pad(noise, 0, 100), 0.0, 3, 0.0, 1.0);
  EXPECT_THROW(synchronize(noise, ref), SyncError);
  ComplexWaveform short_w = w;
  short_w.samples.resize(w.size() / 2);
  EXPECT_THROW(synchronize(short_w, ref), SyncError);
  EXPECT_THROW(demodulate(w, ref, 10), SyncError);
  EXPECT_THROW(demodulate(w, ref, -1), SyncError);
}

TEST(OfdmRx, MeasuredSnrTracksInjectedSnr) {
  auto cfg = tx_for(BandId::W);
  cfg.n_symbols = 256;
  const auto [w, ref] = build_frame(cfg);
  const double occupied = static_cast<double>(ref.active.size()) * cfg.plan.spacing_hz;
  std::mt19937 rng(2);
  for (double snr : {6.0, 12.0, 20.0}) {
    const auto rx = add_awgn(w, snr, rng(), occupied);
    const auto plain = evm_snr(receive(rx, ref, 0, {false, 1e-6}), ref).average_snr_db();
    const auto with_cpe = evm_snr(receive(rx, ref, 0), ref).average_snr_db();
    EXPECT_NEAR(plain, snr, 0.3) << snr;
    EXPECT_LE(with_cpe, plain + 0.05);
    EXPECT_GE(with_cpe, snr - 0.8);
  }
}

TEST(OfdmRx, CommonPhaseErrorIsRemoved) {
  auto cfg = tx_for(BandId::W);
  const auto [w, ref] = build_frame(cfg);
  const std::size_t sym = ref.symbol_len(w.sample_rate_hz);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> ang(-0.6, 0.6);
  ComplexWaveform rx = w;
  for (std::size_t s = static_cast<std::size_t>(ref.n_training()); s < rx.size() / sym; ++s) {
    const cplx rot = std::polar(1.0, ang(rng));
    for (std::size_t i = 0; i < sym; ++i) rx.samples[s * sym + i] *= rot;
  }
  const auto fixed = receive(rx, ref, 0);
  EXPECT_EQ(count_bit_errors(fixed, ref).errors, 0);
  const auto raw = receive(rx, ref, 0, {false, 1e-6});
  EXPECT_GT(count_bit_errors(raw, ref).errors, 1000);
}

TEST(OfdmRx, DeadSubcarriersAreFlagged) {
  const auto [w, ref] = build_frame(tx_for(BandId::D));
  auto raw = demodulate(w, ref, 0);
  const std::vector<int> holes{150, 193, 194, 254};
  for (auto& row : raw.rows)
    for (int k : holes) row[static_cast<std::size_t>(k)] *= 1e-8;
  const auto eq = equalize(raw, ref);
  const auto metrics = evm_snr(eq, ref);
  for (const auto& m : metrics.items) {
    const bool hole = std::find(holes.begin(), holes.end(), m.index) != holes.end();
    EXPECT_EQ(m.available, !hole) << m.index;
    EXPECT_EQ(std::isnan(m.snr_db), hole) << m.index;
  }
  EXPECT_TRUE(std::isfinite(metrics.average_snr_db()));
  // dead subcarriers decode as zeros, so their bits count as errors
  const auto errs = count_bit_errors(eq, ref, {193});
  EXPECT_GT(errs.errors, 0);
  EXPECT_THROW(export_constellation(eq, ref, 193), ConfigError);
}

TEST(OfdmRx, MetricsNeedEnoughSymbols) {
  auto cfg = tx_for(BandId::W);
  cfg.n_symbols = kMinMetricSymbols - 1;
  const auto [w, ref] = build_frame(cfg);
  EXPECT_THROW(evm_snr(receive(w, ref, 0), ref), ConfigError);
}

TEST(OfdmRx, EvmGainNormalizationIgnoresScaleAndRotation) {
  std::mt19937 rng(10);
  const auto [w, ref] = build_frame(tx_for(BandId::W));
  const auto base = evm_snr(receive(add_awgn(w, 15.0, 1), ref, 0, {false, 1e-6}), ref).average_snr_db();
  for (int trial = 0; trial < 5; ++trial) {
    ComplexWaveform y = add_awgn(w, 15.0, 1);
    const cplx g = std::polar(std::uniform_real_distribution<double>(0.1, 10.0)(rng),
                              std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    for (auto& s : y.samples) s *= g;
    EXPECT_NEAR(evm_snr(receive(y, ref, 0, {false, 1e-6}), ref).average_snr_db(), base, 1e-6);
  }
}
