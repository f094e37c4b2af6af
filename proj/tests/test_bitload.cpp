#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "wdlink/bitload.hpp"

using namespace wdlink;

namespace {
SubcarrierMetrics flat_metrics(const BandPlan& plan, double snr_db) {
  SubcarrierMetrics m;
  for (int k = 0; k < plan.n_subcarriers; ++k) m.items.push_back({k, subcarrier_center(plan, k), snr_db, 0.0, 64, true});
  return m;
}
}  // namespace

TEST(BerModel, ThresholdsAtFecLimit) {
  // independent root finding of the same closed forms at BER 2.2e-2
  const std::map<int, double> expected{{1, 3.071281008916061},  {2, 6.081580965555873},
                                       {3, 10.51180058489552},  {4, 12.522074650553684},
                                       {5, 15.405399525905642}, {6, 18.22009296625644}};
  const auto t = threshold_table(FecProfile{});
  for (const auto& [b, v] : expected) EXPECT_NEAR(t.at(b), v, 1e-6) << order_name(b);
}

TEST(BerModel, MonotoneInSnrAndOrder) {
  std::mt19937 rng(1);
  for (int i = 0; i < 500; ++i) {
    const double a = std::uniform_real_distribution<double>(-5.0, 30.0)(rng);
    const double b = a + std::uniform_real_distribution<double>(0.01, 5.0)(rng);
    for (int o = 1; o <= 6; ++o) ASSERT_GE(ber_mqam(a, o), ber_mqam(b, o));
    // the nearest-neighbour forms are only ordered where they are accurate
    for (int o = 1; o < 6; ++o)
      if (ber_mqam(a, o + 1) < 0.1) {
        ASSERT_LE(ber_mqam(a, o), ber_mqam(a, o + 1)) << a << " " << o;
      }
  }
  EXPECT_THROW(ber_mqam(10.0, 0), ConfigError);
  EXPECT_THROW(ber_mqam(10.0, 7), ConfigError);
}

TEST(BerModel, AgreesWithMonteCarlo) {
  // Quick variant; the acceptance run uses a million bits per point.
  for (int o = 1; o <= 6; ++o) {
    for (double target : {2e-2, 3e-3}) {
      double lo = -10.0, hi = 40.0;
      for (int i = 0; i < 60; ++i) ((ber_mqam(0.5 * (lo + hi), o) > target) ? lo : hi) = 0.5 * (lo + hi);
      const double mc = oracle::monte_carlo_ber(o, hi, 300000, 100 + o);
      EXPECT_NEAR(mc / ber_mqam(hi, o), 1.0, 0.15) << order_name(o) << " at " << hi << " dB";
    }
  }
}

TEST(BitLoading, OrderFollowsThresholds) {
  const FecProfile fec;
  const auto t = threshold_table(fec);
  for (const auto& [b, v] : t) {
    EXPECT_EQ(bits_for_snr(v + 1e-6, fec), b);
    EXPECT_EQ(bits_for_snr(v - 1e-3, fec), b - 1);
  }
  EXPECT_EQ(bits_for_snr(-std::numeric_limits<double>::infinity(), fec), 0);
  EXPECT_EQ(bits_for_snr(std::numeric_limits<double>::infinity(), fec), 6);
  EXPECT_EQ(bits_for_snr(std::numeric_limits<double>::quiet_NaN(), fec), 0);
  std::mt19937 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = std::uniform_real_distribution<double>(-10.0, 40.0)(rng);
    ASSERT_LE(bits_for_snr(a, fec), bits_for_snr(a + 0.5, fec));
  }
}

TEST(BitLoading, OnlyDetectedAvailableSubcarriersCarryBits) {
  const auto d = make_default_plans().second;
  auto m = flat_metrics(d, 20.0);
  m.items[200].available = false;
  const auto map = load_bits(m, FecProfile{}, d);
  const auto det = detected_indices(d);
  for (int k = 0; k < d.n_subcarriers; ++k) {
    const bool detected = std::binary_search(det.begin(), det.end(), k);
    EXPECT_EQ(map.bits[static_cast<std::size_t>(k)], (detected && k != 200) ? 6 : 0) << k;
  }
}

TEST(Capacity, DBandUniform16Qam) {
  const auto d = make_default_plans().second;
  const auto map = load_bits(flat_metrics(d, 12.6), FecProfile{}, d);
  const auto c = capacity(map, d, FecProfile{}, 1.0 / 64);
  EXPECT_NEAR(c.raw_gbps, 67.5, 1e-9);
  EXPECT_EQ(c.loaded_subcarriers, 108);
  EXPECT_EQ(c.detected_subcarriers, 108);
  EXPECT_NEAR(c.raw_cp_gbps, 67.5 * 63 / 64, 1e-9);
  // just below the 16QAM threshold the loader falls back to 8QAM
  const auto low = capacity(load_bits(flat_metrics(d, 12.5), FecProfile{}, d), d, FecProfile{}, 0.0);
  EXPECT_NEAR(low.raw_gbps, 108 * 3 * 0.15625, 1e-9);
}

TEST(Capacity, NetRateAndCombination) {
  const auto [w, d] = make_default_plans();
  BandCapacity a, b;
  a.raw_gbps = 106.0;
  b.raw_gbps = 67.5;
  a.net_gbps = 106.0 / 1.155;
  b.net_gbps = 67.5 / 1.155;
  const auto r = combine({a, b});
  EXPECT_NEAR(r.total_raw_gbps, 173.5, 1e-12);
  EXPECT_NEAR(r.total_net_gbps, 150.21645021645023, 1e-9);
  const auto wc = capacity(BitLoadMap::uniform(256, 0), w, FecProfile{}, 0.0);
  EXPECT_EQ(wc.raw_gbps, 0.0);
  EXPECT_THROW(capacity(BitLoadMap::uniform(256, 2), w, FecProfile{}, 0.0), ConfigError);  // nulls loaded
  EXPECT_THROW(capacity(BitLoadMap::uniform(10, 0), w, FecProfile{}, 0.0), ConfigError);
  EXPECT_THROW(FecProfile({1.5, 0.01}).validate(), ConfigError);
}

TEST(Capacity, LinearInLoadedBits) {
  const auto w = make_default_plans().first;
  std::mt19937 rng(4);
  for (int i = 0; i < 100; ++i) {
    BitLoadMap m = BitLoadMap::uniform(256, 0);
    long long total = 0;
    for (int k : data_indices(w)) {
      const int b = std::uniform_int_distribution<int>(0, 6)(rng);
      m.bits[static_cast<std::size_t>(k)] = b;
      total += b;
    }
    const auto c = capacity(m, w, FecProfile{}, 0.0);
    ASSERT_EQ(c.bits_per_symbol, total);
    ASSERT_NEAR(c.raw_gbps, total * w.spacing_hz / 1e9, 1e-9);
    ASSERT_NEAR(c.net_gbps * 1.155, c.raw_gbps, 1e-9);
  }
}
