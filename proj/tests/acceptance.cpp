// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "support/oracles.hpp"
#include "wdlink/scenario.hpp"

using namespace wdlink;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f2(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

LinkSetup scenario_link() {
  return load_scenario(std::filesystem::path(WDLINK_SOURCE_DIR) / "scenarios" / "default.yaml").link;
}

double mean_snr_between(const SubcarrierMetrics& m, double lo_hz, double hi_hz) {
  double acc = 0.0;
  int n = 0;
  for (const auto& x : m.items)
    if (x.available && x.freq_hz >= lo_hz && x.freq_hz <= hi_hz) {
      acc += x.snr_db;
      ++n;
    }
  return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

Outcome band_plan() {
  const auto [w, d] = make_default_plans();
  const double gap = inter_band_gap_hz(w, d) / 1e6;
  const bool ok = std::abs(w.spacing_hz / 1e6 - 136.72) < 0.005 && std::abs(d.spacing_hz / 1e6 - 156.25) < 0.005 &&
                  std::abs(gap - 293.0) <= 1.0;
  return {ok, "spacings " + f2(w.spacing_hz / 1e6, 3) + " / " + f2(d.spacing_hz / 1e6, 3) + " MHz, gap " + f2(gap) +
                  " MHz"};
}

Outcome d_band_capacity() {
  const auto d = make_default_plans().second;
  BitLoadMap map = BitLoadMap::uniform(d.n_subcarriers, 0);
  const auto det = detected_indices(d);
  for (int k : det) map.bits[static_cast<std::size_t>(k)] = 4;
  const auto c = capacity(map, d, FecProfile{}, 0.0);
  return {std::abs(c.raw_gbps - 67.5) <= 0.7,
          std::to_string(det.size()) + " detected subcarriers x 16QAM = " + f2(c.raw_gbps) + " Gb/s"};
}

Outcome net_rate() {
  BandCapacity a;
  a.raw_gbps = 173.5;
  a.net_gbps = 173.5 / (1.0 + FecProfile{}.overhead_fraction);
  const auto r = combine({a});
  return {std::abs(r.total_net_gbps - 150.2) <= 0.1, "173.5 Gb/s raw -> " + f2(r.total_net_gbps, 3) + " Gb/s net"};
}

Outcome end_to_end() {
  const auto link = scenario_link();
  std::vector<BandCapacity> caps;
  double w_gbps = 0.0;
  std::string info;
  for (std::size_t i = 0; i < link.bands.size(); ++i) {
    const auto r = run_band(link, i);
    if (!r.ok()) return {false, to_string(r.band) + ": " + r.failure};
    caps.push_back(r.capacity);
    if (r.band == BandId::W) w_gbps = r.capacity.raw_gbps;
    info += to_string(r.band) + " " + f2(r.capacity.raw_gbps) + " Gb/s (mean SNR " + f2(r.average_snr_db) + " dB), ";
  }
  const double total = combine(caps).total_raw_gbps;
  return {w_gbps >= 95.0 && w_gbps <= 117.0 && total >= 156.0 && total <= 191.0,
          info + "total " + f2(total) + " Gb/s"};
}

Outcome snr_reproduction() {
  auto link = scenario_link();
  std::string info;
  bool ok = true;
  for (std::size_t i = 0; i < link.bands.size(); ++i) {
    auto flat = link;
    flat.bands[i].channel.mask = BandMask({{50e9, 0.0}, {200e9, 0.0}});
    const auto r = run_band(flat, i);
    if (!r.ok()) return {false, r.failure};
    ok = ok && std::abs(r.average_snr_db - 12.0) <= 0.5;
    info += "flat " + to_string(r.band) + " " + f2(r.average_snr_db) + " dB, ";
  }
  const auto r = run_band(link, 0);
  if (!r.ok()) return {false, r.failure};
  const double mid = mean_snr_between(r.metrics, 91.5e9, 93.5e9);
  const double edge = mean_snr_between(r.metrics, 109e9, 110e9);
  const double drop = mid - edge;
  ok = ok && drop >= 8.0 && drop <= 12.0;
  info += "W 109-110 GHz " + f2(drop) + " dB below mid-band";
  return {ok, info};
}

Outcome locking() {
  const auto lasers = default_lasers();
  const auto c2 = default_loop_config(lasers[1].offset_hz);
  const auto c3 = default_loop_config(lasers[2].offset_hz);
  const std::uint64_t seed = 1;
  const auto r2 = simulate_lock(lasers[0], lasers[1], c2, seed);
  const auto r3 = simulate_lock(lasers[0], lasers[2], c3, seed);
  if (!r2.locked || !r3.locked) return {false, "loop did not lock"};
  const auto free2 = free_running_phase(lasers[0], lasers[1], c2.n_steps(), c2.sim_rate_hz, seed);
  const double supp = lin_to_db(estimate_psd(r2.residual_phase, 1e3).at(10e3) / estimate_psd(free2, 1e3).at(10e3));
  const auto bump = find_servo_bump(estimate_psd(r2.locked_beat, 1e3), r2.locked_beat.rf_anchor_hz(), 20e3, 1e6);
  auto tail_var = [](const std::vector<double>& x) {
    const std::size_t s = x.size() / 2;
    double m = 0.0, v = 0.0;
    for (std::size_t i = s; i < x.size(); ++i) m += x[i];
    m /= static_cast<double>(x.size() - s);
    for (std::size_t i = s; i < x.size(); ++i) v += (x[i] - m) * (x[i] - m);
    return v / static_cast<double>(x.size() - s);
  };
  const double v2 = tail_var(r2.residual_phase.phases), v3 = tail_var(r3.residual_phase.phases);
  const bool ok = supp <= -20.0 && bump.found && bump.freq_hz >= 50e3 && bump.freq_hz <= 200e3 && v3 > v2;
  return {ok, "LD2 suppression at 10 kHz " + f2(supp, 1) + " dB, servo bump " +
                  (bump.found ? f2(bump.freq_hz / 1e3, 1) + " kHz" : std::string("not found")) +
                  ", residual phase variance LD3 " + f2(v3, 4) + " vs LD2 " + f2(v2, 4) + " rad^2"};
}

Outcome oracle_equivalence() {
  double worst_ber = 0.0;
  for (int o = kMinOrderBits; o <= kMaxOrderBits; ++o) {
    for (double target : {2e-2, 1e-3}) {
      double lo = -10.0, hi = 40.0;
      for (int i = 0; i < 60; ++i) ((ber_mqam(0.5 * (lo + hi), o) > target) ? lo : hi) = 0.5 * (lo + hi);
      const double mc = oracle::monte_carlo_ber(o, hi, 1000000, 1000 + static_cast<std::uint64_t>(o));
      worst_ber = std::max(worst_ber, std::abs(mc / ber_mqam(hi, o) - 1.0));
    }
  }
  double worst_fm = 0.0;
  const LaserSpec quiet_m{"M", 0.0, 0.0}, quiet_s{"S", 0.0, 92.5e9};
  for (double fm : {1e3, 2e3, 5e3, 10e3, 20e3, 30e3}) {
    auto c = default_loop_config(92.5e9);
    c.fm_dev_hz = 1e3;
    c.fm_rate_hz = fm;
    c.duration_s = 10e-3;
    const auto r = simulate_lock(quiet_m, quiet_s, c, 1);
    const double amp = oracle::tone_amplitude(r.residual_phase.phases, c.sim_rate_hz, fm, 5e-3);
    const double measured = 20.0 * std::log10(amp / (c.fm_dev_hz / fm));
    worst_fm = std::max(worst_fm, std::abs(measured - oracle::suppression_db({c.kp, c.ki, c.actuator_bw_hz}, fm)));
  }
  return {worst_ber <= 0.15 && worst_fm <= 3.0, "worst BER model deviation " + f2(100 * worst_ber, 1) +
                                                    "% (1e6 bits per point), worst FM suppression deviation " +
                                                    f2(worst_fm, 3) + " dB"};
}

Outcome chain_sanity() {
  // all-pass loopback: no phase noise, flat channel, no noise
  long long errors = 0, bits = 0;
  double worst_papr = 0.0;
  const auto link = scenario_link();
  for (const auto& b : link.bands) {
    const auto [w, ref] = transmit(b);
    worst_papr = std::max(worst_papr, papr_db(w));
    const auto sync = synchronize(w, ref);
    const auto eq = equalize(demodulate(w, ref, static_cast<std::ptrdiff_t>(sync)), ref, b.equalizer);
    const auto c = count_bit_errors(eq, ref);
    errors += c.errors;
    bits += c.bits;
  }

  // per-symbol PAPR CCDF of the modulator with independent random 16QAM data
  auto cfg = link.bands[0].tx;
  cfg.cp_fraction = 0.0;
  const auto ref = build_frame(cfg).second;
  std::mt19937_64 rng(77);
  std::vector<double> paprs;
  std::vector<std::vector<cplx>> rows(1, std::vector<cplx>(static_cast<std::size_t>(cfg.plan.n_subcarriers)));
  const std::size_t n_sym = 200000;
  for (std::size_t s = 0; s < n_sym; ++s) {
    for (int k : ref.active) rows[0][static_cast<std::size_t>(k)] = constellation(4).points[rng() % 16];
    paprs.push_back(papr_db(modulate_symbols(ref, rows, ref.active, cfg.sample_rate_hz(), cfg.plan.center_hz)));
  }
  std::sort(paprs.begin(), paprs.end());
  const double ccdf = paprs[static_cast<std::size_t>((1.0 - 1e-4) * n_sym)];

  // same statistic over PRBS-driven payload symbols, reported for context
  std::vector<double> prbs;
  std::mt19937 seeds(5);
  while (prbs.size() < n_sym) {
    cfg.seed = 1u + seeds() % 0x1FFFFu;
    const auto [w, r] = build_frame(cfg);
    const std::size_t n = r.fft_size(w.sample_rate_hz);
    for (std::size_t s = static_cast<std::size_t>(r.n_training()) * n; s + n <= w.size(); s += n)
      prbs.push_back(papr_db(std::span<const cplx>(w.samples).subspan(s, n)));
  }
  std::sort(prbs.begin(), prbs.end());
  const double prbs_ccdf = prbs[static_cast<std::size_t>((1.0 - 1e-4) * prbs.size())];

  const bool ok = errors == 0 && bits >= 100000 && worst_papr <= 10.0 + 0.1 && ccdf >= 11.0 && ccdf <= 13.0;
  return {ok, "loopback " + std::to_string(errors) + " errors in " + std::to_string(bits) + " bits, clipped PAPR " +
                  f2(worst_papr, 3) + " dB, unclipped PAPR at 1e-4 CCDF " + f2(ccdf) + " dB (random data; " +
                  f2(prbs_ccdf) + " dB for PRBS-driven symbols)"};
}

Outcome path_loss() {
  const double l = free_space_path_loss_db(92.5e9, 0.12);
  return {std::abs(l - 53.3) <= 0.1, "FSPL at 92.5 GHz over 0.12 m = " + f2(l, 3) + " dB"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"C1 band-plan arithmetic", 1.0, band_plan},
      {"C2 D-band capacity decomposition", 1.0, d_band_capacity},
      {"C3 net-rate arithmetic", 1.0, net_rate},
      {"C4 end-to-end capacity", 60.0, end_to_end},
      {"C5 SNR reproduction", 30.0, snr_reproduction},
      {"C6 locking behavior", 60.0, locking},
      {"C7 oracle equivalence", 120.0, oracle_equivalence},
      {"C8 chain sanity", 60.0, chain_sanity},
      {"FSPL formula", 1.0, path_loss},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs <= c.budget_s;
    failures += !pass;
    std::printf("%s  %s: %s [%.2f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_s);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
