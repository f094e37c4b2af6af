#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "wdlink/ofdm_tx.hpp"

using namespace wdlink;

TEST(Prbs, GoldenWord) {
  const auto bits = gen_prbs(17, 32, 0x1FFFF);
  std::uint32_t word = 0;
  for (auto b : bits) word = (word << 1) | b;
  EXPECT_EQ(word, 0x0003800Fu);
}

TEST(Prbs, MatchesReferenceLfsr) {
  const std::vector<std::pair<int, int>> polys{{7, 6}, {9, 5}, {11, 9}, {15, 14}, {17, 14}, {23, 18}, {31, 28}};
  std::mt19937 rng(3);
  for (auto [order, tap] : polys) {
    const std::uint32_t mask = (1u << order) - 1u;
    std::uint32_t seed = 0;
    while ((seed & mask) == 0) seed = static_cast<std::uint32_t>(rng());
    oracle::Lfsr ref(order, {order, tap}, seed & mask);
    Prbs p(order, seed);
    for (int i = 0; i < 5000; ++i) ASSERT_EQ(p.next(), ref.next()) << "order " << order << " bit " << i;
  }
}

TEST(Prbs, MaximalLengthForShortOrders) {
  for (int order : {7, 9, 11}) {
    Prbs p(order, 1);
    const auto start = p.state();
    std::uint64_t n = 0;
    do {
      p.next();
      ++n;
    } while (p.state() != start && n <= p.period());
    EXPECT_EQ(n, p.period()) << order;
  }
}

TEST(Prbs, RejectsBadArguments) {
  EXPECT_THROW(Prbs(13, 1), ConfigError);
  EXPECT_THROW(Prbs(17, 0), ConfigError);
  EXPECT_THROW(Prbs(7, 0x80), ConfigError);
}

TEST(Qam, UnitEnergyAndSize) {
  for (int b = kMinOrderBits; b <= kMaxOrderBits; ++b) {
    const auto& c = constellation(b);
    ASSERT_EQ(c.size(), 1u << b);
    double e = 0.0;
    for (auto p : c.points) e += std::norm(p);
    EXPECT_NEAR(e / c.size(), 1.0, 1e-12) << b;
  }
  EXPECT_NEAR(constellation(3).min_distance, 2.0 / std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(constellation(4).min_distance, 2.0 / std::sqrt(10.0), 1e-12);
  EXPECT_NEAR(constellation(5).min_distance, 2.0 / std::sqrt(20.0), 1e-12);
  EXPECT_NEAR(constellation(6).min_distance, 2.0 / std::sqrt(42.0), 1e-12);
}

TEST(Qam, GrayNeighboursDifferInOneBit) {
  for (int b : {1, 2, 3, 4, 6}) {
    const auto& c = constellation(b);
    for (unsigned x = 0; x < c.size(); ++x)
      for (unsigned y = x + 1; y < c.size(); ++y)
        if (std::abs(std::abs(c.points[x] - c.points[y]) - c.min_distance) < 1e-9) {
          EXPECT_EQ(std::popcount(x ^ y), 1) << b << ": " << x << " vs " << y;
        }
  }
}

TEST(Qam, Cross32NeighbourBitFlips) {
  const auto& c = constellation(5);
  int pairs = 0, flips = 0;
  for (unsigned x = 0; x < 32; ++x)
    for (unsigned y = x + 1; y < 32; ++y)
      if (std::abs(std::abs(c.points[x] - c.points[y]) - c.min_distance) < 1e-9) {
        ++pairs;
        flips += std::popcount(x ^ y);
      }
  EXPECT_EQ(pairs, 52);
  EXPECT_EQ(flips, 56);
}

TEST(Qam, MapDemapRoundTrip) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int b = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(b) * std::uniform_int_distribution<int>(1, 40)(rng));
    for (auto& x : bits) x = static_cast<std::uint8_t>(rng() & 1u);
    const auto syms = map_qam(bits, b);
    std::vector<std::uint8_t> back;
    const double r = 0.45 * constellation(b).min_distance;
    for (auto s : syms) {
      const double ang = std::uniform_real_distribution<double>(0, oracle::kTwoPi)(rng);
      demap_qam(s + std::polar(r, ang), b, back);
    }
    ASSERT_EQ(back, bits);
  }
  EXPECT_THROW(map_qam(std::vector<std::uint8_t>(5, 0), 2), ConfigError);
  EXPECT_THROW(constellation(7), ConfigError);
}

namespace {
TxConfig default_tx() {
  TxConfig cfg;
  cfg.plan = make_default_plans().first;
  return cfg;
}
}  // namespace

TEST(OfdmTx, FrameGeometry) {
  const auto cfg = default_tx();
  const auto [w, ref] = build_frame(cfg);
  EXPECT_DOUBLE_EQ(w.sample_rate_hz, 70e9);
  EXPECT_EQ(ref.fft_size(w.sample_rate_hz), 512u);
  EXPECT_EQ(ref.cp_len(w.sample_rate_hz), 8u);
  EXPECT_EQ(w.size(), 68u * 520u);
  EXPECT_NEAR(w.mean_power(), 1.0, 1e-12);
  EXPECT_EQ(ref.pilots.size(), 8u);
  EXPECT_EQ(ref.active.size(), 254u);
  for (int k : ref.pilots) EXPECT_TRUE(std::binary_search(ref.sync_carriers.begin(), ref.sync_carriers.end(), k));
}

TEST(OfdmTx, SubcarriersLandOnTheirFrequencies) {
  // Each payload symbol, stripped of its prefix and transformed, returns the
  // transmitted value at the bin nearest the subcarrier's absolute frequency.
  auto cfg = default_tx();
  cfg.n_symbols = 2;
  cfg.n_training = 1;
  const auto [w, ref] = build_frame(cfg);
  const std::size_t n = ref.fft_size(w.sample_rate_hz), cp = ref.cp_len(w.sample_rate_hz);
  for (int s = 0; s < 3; ++s) {
    const std::size_t start = static_cast<std::size_t>(s) * (n + cp) + cp;
    std::vector<cplx> seg(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(start + i) / w.sample_rate_hz;
      // remove the half-spacing shift so subcarriers sit on bins
      seg[i] = w.samples[start + i] * std::polar(1.0, -oracle::kTwoPi * cfg.plan.spacing_hz / 2 * t);
    }
    const auto spec = fft(seg);
    const auto& row = s == 0 ? ref.training[0] : ref.payload[static_cast<std::size_t>(s - 1)];
    for (int k : ref.active) {
      const double f = subcarrier_center(cfg.plan, k) - cfg.plan.spacing_hz / 2 - w.rf_anchor_hz();
      const auto bin = static_cast<std::size_t>((std::llround(f / cfg.plan.spacing_hz) + static_cast<long long>(n)) % static_cast<long long>(n));
      ASSERT_NEAR(std::abs(spec[bin] / (static_cast<double>(n) * ref.tx_scale) - row[static_cast<std::size_t>(k)]), 0.0, 1e-9);
    }
  }
}

TEST(OfdmTx, CyclicPrefixCopiesSymbolTail) {
  const auto [w, ref] = build_frame(default_tx());
  const std::size_t n = 512, cp = 8;
  const double shift = ref.grid_offset_hz(w.rf_anchor_hz());
  for (std::size_t s = 0; s < 5; ++s) {
    const std::size_t base = s * (n + cp);
    for (std::size_t i = 0; i < cp; ++i) {
      // the frequency shift advances by n samples between prefix and tail
      const cplx rot = std::polar(1.0, oracle::kTwoPi * shift * static_cast<double>(n) / w.sample_rate_hz);
      ASSERT_NEAR(std::abs(w.samples[base + i] * rot - w.samples[base + n + i]), 0.0, 1e-9);
    }
  }
}

TEST(OfdmTx, ClippingBoundsPapr) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = default_tx();
    cfg.seed = static_cast<std::uint32_t>(rng() | 1u) & 0x1FFFF;
    if (cfg.seed == 0) cfg.seed = 1;
    const double ratio = std::uniform_real_distribution<double>(4.0, 12.0)(rng);
    const auto [w, ref] = build_frame(cfg);
    const auto c = clip(w, ratio);
    // the clip level is set from the unclipped mean, which clipping then lowers
    const double drop_db = lin_to_db(w.mean_power() / c.mean_power());
    EXPECT_LE(papr_db(c), ratio + drop_db + 1e-9);
    EXPECT_GE(drop_db, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i)
      ASSERT_LE(std::abs(c.samples[i]), std::abs(w.samples[i]) + 1e-15);
  }
}

namespace {
// Per-symbol PAPR quantiles of the library modulator fed with uniform random QPSK.
double modulator_papr_quantile(double prob, std::size_t n_symbols) {
  auto cfg = default_tx();
  cfg.cp_fraction = 0.0;
  const auto ref = build_frame(cfg).second;
  std::mt19937 rng(21);
  std::vector<double> paprs;
  std::vector<std::vector<cplx>> rows(1, std::vector<cplx>(256));
  for (std::size_t i = 0; i < n_symbols; ++i) {
    for (int k : ref.active) rows[0][static_cast<std::size_t>(k)] = constellation(2).points[rng() % 4];
    paprs.push_back(papr_db(modulate_symbols(ref, rows, ref.active, 70e9, 92.5e9)));
  }
  std::sort(paprs.begin(), paprs.end());
  return paprs[static_cast<std::size_t>((1.0 - prob) * static_cast<double>(paprs.size()))];
}
}  // namespace

TEST(OfdmTx, UnclippedPaprMatchesIndependentMonteCarlo) {
  const double lib = modulator_papr_quantile(1e-3, 20000);
  const double ref = oracle::papr_ccdf_quantile(512, 254, 20000, 1e-3, 99);
  EXPECT_NEAR(lib, ref, 0.3);
  EXPECT_GT(ref, 10.5);
  EXPECT_LT(ref, 12.0);
}

TEST(OfdmTx, PrbsFramesHaveHeavierPaprTail) {
  // Trinomial m-sequences carry fixed third-order correlations, which show up
  // as occasional peaky symbols compared with independent data.
  auto cfg = default_tx();
  cfg.cp_fraction = 0.0;
  std::vector<double> paprs;
  std::mt19937 rng(21);
  while (paprs.size() < 20000) {
    cfg.seed = 1u + rng() % 0x1FFFFu;
    const auto [w, ref] = build_frame(cfg);
    for (std::size_t s = 4 * 512; s + 512 <= w.size(); s += 512)
      paprs.push_back(papr_db(std::span<const cplx>(w.samples).subspan(s, 512)));
  }
  std::sort(paprs.begin(), paprs.end());
  const double prbs = paprs[static_cast<std::size_t>(0.999 * paprs.size())];
  EXPECT_GT(prbs, modulator_papr_quantile(1e-3, 20000) + 1.0);
}

TEST(Prbs, PeriodBalance) {
  Prbs p(17, 0x1FFFF);
  long long ones = 0;
  for (std::uint64_t i = 0; i < p.period(); ++i) ones += p.next();
  const long long zeros = static_cast<long long>(p.period()) - ones;
  EXPECT_EQ(ones - zeros, 1);
  EXPECT_EQ(p.state(), 0x1FFFFu);
}

TEST(OfdmTx, Deterministic) {
  const auto a = build_frame(default_tx()).first;
  const auto b = build_frame(default_tx()).first;
  EXPECT_EQ(a.samples, b.samples);
}

TEST(OfdmTx, RejectsInvalidConfig) {
  auto cfg = default_tx();
  cfg.cp_fraction = 0.6;
  EXPECT_THROW(build_frame(cfg), ConfigError);
  cfg = default_tx();
  cfg.uniform_order = 7;
  EXPECT_THROW(build_frame(cfg), ConfigError);
  cfg = default_tx();
  cfg.bits = BitLoadMap::uniform(10, 2);
  EXPECT_THROW(build_frame(cfg), ConfigError);
  cfg = default_tx();
  cfg.cp_fraction = 0.01;  // 5.12 samples
  EXPECT_THROW(build_frame(cfg), ConfigError);
  EXPECT_THROW(clip(build_frame(default_tx()).first, 0.0), ConfigError);
}
