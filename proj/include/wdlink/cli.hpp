#pragma once

/**
 * @file cli.hpp
 * @brief The `sim` command line: lock-sim, tx, run, bitload, report.
 *
 * Exit codes: 0 success, 2 configuration error, 3 lock or sync failure,
 * 4 I/O error.
 */

#include <CLI11.hpp>

#include <iostream>

#include "wdlink/report.hpp"
#include "wdlink/scenario.hpp"

namespace wdlink::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kLinkFailure = 3, kIoError = 4 };

struct Options {
  std::string command;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> rbw_hz;
  std::string band = "all";
  bool free_running = false;
  std::optional<double> clip_db;
  std::string snr_csv;
};

namespace detail {

namespace fs = std::filesystem;

inline bool band_selected(const Options& o, BandId b) {
  return o.band == "all" || band_from_string(o.band) == b;
}

inline void prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out);
}

inline Scenario load(const Options& o) {
  if (o.scenario.empty()) throw ConfigError(o.command + " needs --scenario");
  auto sc = load_scenario(o.scenario, o.seed_override);
  if (o.band != "all") (void)band_from_string(o.band);
  return sc;
}

inline void append_common(io::KeyValues& kv, const std::string& command, const Scenario& sc,
                          const BandSetup& b) {
  kv.emplace_back("command", command);
  append_plan(kv, b.plan());
  kv.emplace_back("scenario_seed", std::to_string(sc.seed));
  kv.emplace_back("cp_fraction", io::fmt(b.tx.cp_fraction));
  kv.emplace_back("fec_overhead_fraction", io::fmt(sc.link.fec.overhead_fraction));
  kv.emplace_back("fec_ber_threshold", io::fmt(sc.link.fec.ber_threshold));
}

inline double tail_variance(const std::vector<double>& x) {
  const std::size_t start = x.size() / 2;
  double mean = 0.0;
  for (std::size_t i = start; i < x.size(); ++i) mean += x[i];
  mean /= static_cast<double>(x.size() - start);
  double var = 0.0;
  for (std::size_t i = start; i < x.size(); ++i) var += (x[i] - mean) * (x[i] - mean);
  return var / static_cast<double>(x.size() - start);
}

inline int cmd_lock_sim(const Options& o, std::ostream& out) {
  auto sc = load(o);
  if (o.rbw_hz) sc.lock_rbw_hz = *o.rbw_hz;
  prepare_out(o.out);
  bool all_locked = true;
  constexpr double kExportSpan = 2e6;
  for (const auto& b : sc.link.bands) {
    if (!band_selected(o, b.plan().name)) continue;
    b.validate();
    const auto name = to_string(b.plan().name);
    const fs::path dir(o.out);
    const auto& cfg = b.loop;
    const auto free_phase = free_running_phase(sc.link.master, b.slave, cfg.n_steps(), cfg.sim_rate_hz, b.lock_seed);
    const auto free_psd = estimate_psd(free_phase, sc.lock_rbw_hz);
    io::write_psd(dir / (name + "_free_phase_psd.csv"), free_psd, 0.0, kExportSpan);

    io::KeyValues kv;
    append_common(kv, "lock-sim", sc, b);
    kv.emplace_back("slave_laser", b.slave.label);
    kv.emplace_back("target_offset_hz", io::fmt(cfg.target_offset_hz));
    kv.emplace_back("lock_rbw_hz", io::fmt(sc.lock_rbw_hz));
    kv.emplace_back("mode", o.free_running ? "free_running" : "locked");

    ComplexWaveform beat;
    if (o.free_running) {
      beat = free_running_beat(sc.link.master, b.slave, cfg.n_steps(), cfg.sim_rate_hz, b.lock_seed);
    } else {
      const auto r = simulate_lock(sc.link.master, b.slave, cfg, b.lock_seed);
      all_locked = all_locked && r.locked;
      beat = r.locked_beat;
      io::write_lock_trace(dir / (name + "_lock_trace.csv"), r, sc.lock_trace_stride);
      const auto locked_psd = estimate_psd(r.residual_phase, sc.lock_rbw_hz);
      io::write_psd(dir / (name + "_locked_phase_psd.csv"), locked_psd, 0.0, kExportSpan);
      kv.emplace_back("locked", r.locked ? "true" : "false");
      kv.emplace_back("diverged", r.diverged ? "true" : "false");
      kv.emplace_back("cycle_slips", std::to_string(r.cycle_slips));
      kv.emplace_back("unity_gain_hz", io::fmt(unity_gain_hz(cfg)));
      kv.emplace_back("phase_margin_deg", io::fmt(phase_margin_deg(cfg)));
      kv.emplace_back("residual_phase_var_rad2", io::fmt(tail_variance(r.residual_phase.phases)));
      kv.emplace_back("suppression_10khz_db", io::fmt(lin_to_db(locked_psd.at(10e3) / free_psd.at(10e3))));
      kv.emplace_back("model_suppression_10khz_db", io::fmt(closed_loop_suppression(cfg, 10e3)));
    }
    const auto beat_psd = estimate_psd(beat, sc.lock_rbw_hz);
    const double carrier = beat.rf_anchor_hz();
    io::write_psd(dir / (name + "_beat_psd.csv"), beat_psd, carrier - kExportSpan, carrier + kExportSpan);
    const auto bump = find_servo_bump(beat_psd, carrier, 20e3, 1e6);
    kv.emplace_back("servo_bump_found", bump.found ? "true" : "false");
    kv.emplace_back("servo_bump_hz", io::fmt(bump.found ? bump.freq_hz : 0.0));
    io::write_key_values(dir / (name + "_status.csv"), kv);
    out << name << ": " << (o.free_running ? "free running" : (all_locked ? "locked" : "NOT locked"))
        << (bump.found ? ", servo bump at " + io::fmt(bump.freq_hz / 1e3) + " kHz" : ", no servo bump") << '\n';
  }
  write_summary(o.out);
  return all_locked ? kOk : kLinkFailure;
}

inline int cmd_tx(const Options& o, std::ostream& out) {
  auto sc = load(o);
  if (o.rbw_hz) sc.link.rbw_hz = *o.rbw_hz;
  prepare_out(o.out);
  for (auto b : sc.link.bands) {
    if (!band_selected(o, b.plan().name)) continue;
    if (o.clip_db) b.tx.clip_ratio_db = *o.clip_db;
    b.validate();
    const auto name = to_string(b.plan().name);
    const fs::path dir(o.out);
    double papr_unclipped = 0.0;
    const auto [w, ref] = transmit(b, &papr_unclipped);
    io::write_iq(dir / (name + "_tx.iq"), w);
    io::write_frame_ref(dir / (name + "_frame_ref.csv"), ref);
    io::write_psd(dir / (name + "_tx_psd.csv"), estimate_psd(w, sc.link.rbw_hz));
    io::KeyValues kv;
    append_common(kv, "tx", sc, b);
    kv.emplace_back("clip_ratio_db", io::fmt(b.tx.clip_ratio_db));
    kv.emplace_back("papr_unclipped_db", io::fmt(papr_unclipped));
    kv.emplace_back("papr_db", io::fmt(papr_db(w)));
    kv.emplace_back("sample_rate_hz", io::fmt(w.sample_rate_hz));
    kv.emplace_back("n_samples", std::to_string(w.size()));
    io::write_key_values(dir / (name + "_status.csv"), kv);
    out << name << ": PAPR " << io::fmt(papr_db(w)) << " dB after clipping at " << io::fmt(b.tx.clip_ratio_db)
        << " dB\n";
  }
  write_summary(o.out);
  return kOk;
}

inline int cmd_run(const Options& o, std::ostream& out) {
  auto sc = load(o);
  if (o.rbw_hz) sc.link.rbw_hz = *o.rbw_hz;
  sc.link.validate();
  prepare_out(o.out);
  const fs::path dir(o.out);
  io::write_thresholds(dir / "thresholds.csv", sc.link.fec);
  bool ok = true;
  for (std::size_t i = 0; i < sc.link.bands.size(); ++i) {
    const auto& b = sc.link.bands[i];
    if (!band_selected(o, b.plan().name)) continue;
    const auto name = to_string(b.plan().name);
    const auto r = run_band(sc.link, i);

    io::KeyValues kv;
    append_common(kv, "run", sc, b);
    kv.emplace_back("status", r.ok() ? "ok" : (r.lock.locked ? "sync_failed" : "lock_failed"));
    if (!r.ok()) {
      std::string msg = r.failure;
      std::replace(msg.begin(), msg.end(), ',', ';');
      kv.emplace_back("failure", msg);
    }
    kv.emplace_back("target_snr_db", b.channel.target_snr_db ? io::fmt(*b.channel.target_snr_db) : "none");
    kv.emplace_back("locked", r.lock.locked ? "true" : "false");
    kv.emplace_back("cycle_slips", std::to_string(r.lock.cycle_slips));
    if (r.lock.locked) {
      kv.emplace_back("papr_unclipped_db", io::fmt(r.papr_unclipped_db));
      kv.emplace_back("papr_db", io::fmt(r.papr_db));
      io::write_iq(dir / (name + "_rx.iq"), r.rx);
      io::write_psd(dir / (name + "_rx_psd.csv"), estimate_psd(r.rx, sc.link.rbw_hz));
      io::write_psd(dir / (name + "_tx_psd.csv"), estimate_psd(r.tx, sc.link.rbw_hz));
    }
    if (r.synced) {
      kv.emplace_back("sync_offset", std::to_string(r.sync.offset));
      kv.emplace_back("frame_start", std::to_string(r.frame_start));
      kv.emplace_back("sync_correlation", io::fmt(r.sync.correlation));
      kv.emplace_back("bit_errors", std::to_string(r.errors.errors));
      kv.emplace_back("bits_compared", std::to_string(r.errors.bits));
      kv.emplace_back("ber", io::fmt(r.errors.ber()));
      double cpe_ms = 0.0;
      for (double c : r.eq.cpe_rad) cpe_ms += c * c;
      kv.emplace_back("cpe_rms_rad", io::fmt(std::sqrt(cpe_ms / static_cast<double>(r.eq.cpe_rad.size()))));
      io::write_metrics(dir / (name + "_metrics.csv"), r.metrics);
      io::write_bitload(dir / (name + "_bitload.csv"), r.map, b.plan());
      const auto det = detected_indices(b.plan());
      for (int k : {det[det.size() / 2], det.back()}) {
        if (r.ref.bits[static_cast<std::size_t>(k)] == 0 || r.eq.dead[static_cast<std::size_t>(k)]) continue;
        std::vector<cplx> sent;
        for (const auto& row : r.ref.payload) sent.push_back(row[static_cast<std::size_t>(k)]);
        io::write_constellation(dir / (name + "_constellation_" + std::to_string(k) + ".csv"),
                                export_constellation(r.eq, r.ref, k), sent);
      }
    }
    io::write_key_values(dir / (name + "_status.csv"), kv);
    if (r.ok())
      out << name << ": " << io::fmt(r.capacity.raw_gbps) << " Gb/s raw, mean SNR "
          << io::fmt(r.average_snr_db) << " dB, BER " << io::fmt(r.errors.ber()) << '\n';
    else
      out << name << ": " << r.failure << '\n';
    ok = ok && r.ok();
  }
  const auto j = write_summary(o.out);
  if (j.contains("totals")) out << "total: " << j["totals"]["raw_gbps"].get<double>() << " Gb/s raw\n";
  return ok ? kOk : kLinkFailure;
}

inline int cmd_bitload(const Options& o, std::ostream& out) {
  if (o.snr_csv.empty()) throw ConfigError("bitload needs --snr-csv");
  if (o.band == "all") throw ConfigError("bitload needs --band W or --band D");
  const BandId id = band_from_string(o.band);
  Scenario sc;
  if (!o.scenario.empty()) {
    sc = load_scenario(o.scenario, o.seed_override);
  } else {
    sc.link = default_link_setup(sc.seed);
  }
  const BandSetup* setup = nullptr;
  for (const auto& b : sc.link.bands)
    if (b.plan().name == id) setup = &b;
  if (!setup) throw ConfigError("scenario has no band " + o.band);
  const auto& plan = setup->plan();

  const auto metrics = io::read_metrics(o.snr_csv);
  const auto det = detected_indices(plan);
  for (const auto& m : metrics.items)
    if (m.index >= plan.n_subcarriers) throw ConfigError(o.snr_csv + ": subcarrier index " + std::to_string(m.index) + " out of range");
  const auto map = load_bits(metrics, sc.link.fec, plan);

  prepare_out(o.out);
  const fs::path dir(o.out);
  const auto name = to_string(id);
  SubcarrierMetrics canonical = metrics;
  for (auto& m : canonical.items) m.freq_hz = subcarrier_center(plan, m.index);
  io::write_metrics(dir / (name + "_metrics.csv"), canonical);
  io::write_bitload(dir / (name + "_bitload.csv"), map, plan);
  io::write_thresholds(dir / "thresholds.csv", sc.link.fec);
  io::KeyValues kv;
  append_common(kv, "bitload", sc, *setup);
  kv.emplace_back("snr_source", fs::path(o.snr_csv).filename().string());
  io::write_key_values(dir / (name + "_status.csv"), kv);
  const auto c = capacity(map, plan, sc.link.fec, setup->tx.cp_fraction);
  out << name << ": " << io::fmt(c.raw_gbps) << " Gb/s raw, " << io::fmt(c.net_gbps) << " Gb/s net\n";
  write_summary(o.out);
  return kOk;
}

inline int cmd_report(const Options& o, std::ostream& out) {
  if (!fs::is_directory(o.out)) throw IoError("no results directory " + o.out);
  const auto j = write_summary(o.out);
  for (const auto& [band, b] : j["bands"].items())
    if (b.contains("capacity")) out << band << ": " << b["capacity"]["raw_gbps"].get<double>() << " Gb/s raw\n";
  return kOk;
}

}  // namespace detail

/// Parses arguments and runs one subcommand. Never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Dual-band W/D millimeter-wave link simulator", "sim"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool scenario_required) {
    auto* s = sub->add_option("--scenario", o.scenario, "Scenario YAML file");
    if (scenario_required) s->required();
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--seed-override", o.seed_override, "Replace the scenario's top-level seed");
    sub->add_option("--rbw-hz", o.rbw_hz, "PSD resolution bandwidth in Hz")->check(CLI::PositiveNumber);
    sub->add_option("--band", o.band, "W, D or all")->check(CLI::IsMember({"W", "D", "all"}));
  };
  auto* lock = app.add_subcommand("lock-sim", "Simulate the offset locks and export phase-noise spectra");
  add_common(lock, true);
  lock->add_flag("--free-running", o.free_running, "Leave the loops open");
  auto* tx = app.add_subcommand("tx", "Generate transmit frames, report PAPR");
  add_common(tx, true);
  tx->add_option("--clip-db", o.clip_db, "Clipping ratio in dB above RMS")->check(CLI::PositiveNumber);
  auto* run = app.add_subcommand("run", "Run the full link and load bits");
  add_common(run, true);
  auto* bl = app.add_subcommand("bitload", "Load bits from an external per-subcarrier SNR CSV");
  add_common(bl, false);
  bl->add_option("--snr-csv", o.snr_csv, "CSV with index and snr_db columns")->required();
  auto* rep = app.add_subcommand("report", "Rebuild summary.json from stored CSVs");
  rep->add_option("--out", o.out, "Results directory")->required();
  rep->add_option("--scenario", o.scenario, "Ignored; accepted for symmetry");

  if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
    err << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
    return kConfigError;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kConfigError;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    if (o.command == "lock-sim") return detail::cmd_lock_sim(o, out);
    if (o.command == "tx") return detail::cmd_tx(o, out);
    if (o.command == "run") return detail::cmd_run(o, out);
    if (o.command == "bitload") return detail::cmd_bitload(o, out);
    return detail::cmd_report(o, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const SyncError& e) {
    err << "link failure: " << e.what() << '\n';
    return kLinkFailure;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::out_of_range& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace wdlink::cli
