#pragma once

/**
 * @file scenario.hpp
 * @brief YAML scenario files.
 *
 * Unknown keys, wrong types and out-of-range values are rejected with
 * `file:line:column` messages. See scenarios/default.yaml for the schema.
 */

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <set>

#include "wdlink/io.hpp"
#include "wdlink/pipeline.hpp"

namespace wdlink {

inline constexpr int kSchemaVersion = 1;

struct Scenario {
  std::uint64_t seed = 1;
  LinkSetup link;
  double lock_rbw_hz = 1000.0;
  std::size_t lock_trace_stride = 100;
  std::filesystem::path source;
};

namespace detail {

class YamlReader {
 public:
  explicit YamlReader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    const auto m = n.Mark();
    if (m.is_null()) throw ConfigError(file_ + ": " + msg);
    throw ConfigError(file_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) +
                      ": " + msg);
  }

  void expect_map(const YAML::Node& n, const std::string& what, const std::set<std::string>& allowed) const {
    if (!n.IsMap()) fail(n, what + " must be a mapping");
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + what);
    }
  }

  [[nodiscard]] double number(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a number");
    const auto s = n.Scalar();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) fail(n, what + " must be a finite number, got '" + s + "'");
    return v;
  }

  [[nodiscard]] std::uint64_t integer(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be an integer");
    const auto s = n.Scalar();
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      if (!s.empty() && s[0] != '-') v = std::stoull(s, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) fail(n, what + " must be a non-negative integer, got '" + s + "'");
    return v;
  }

  [[nodiscard]] int small_int(const YAML::Node& n, const std::string& what) const {
    const auto v = integer(n, what);
    if (v > 1'000'000'000ULL) fail(n, what + " is out of range");
    return static_cast<int>(v);
  }

  [[nodiscard]] bool boolean(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be true or false");
    const auto s = n.Scalar();
    if (s == "true") return true;
    if (s == "false") return false;
    fail(n, what + " must be true or false, got '" + s + "'");
  }

  [[nodiscard]] std::string text(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a string");
    return n.Scalar();
  }

  [[nodiscard]] FreqInterval interval(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence() || n.size() != 2) fail(n, what + " must be a [low, high] pair");
    FreqInterval f{number(n[0], what), number(n[1], what)};
    if (!(f.lo_hz < f.hi_hz)) fail(n, what + " must have low < high");
    return f;
  }

  /// Optional number; a YAML null disengages it.
  [[nodiscard]] std::optional<double> optional_number(const YAML::Node& n, const std::string& what) const {
    if (n.IsNull()) return std::nullopt;
    return number(n, what);
  }

  /// Runs `f`, attaching this node's position to any ConfigError it throws.
  template <class F>
  void checked(const YAML::Node& n, F&& f) const {
    try {
      f();
    } catch (const ConfigError& e) {
      fail(n, e.what());
    }
  }

 private:
  std::string file_;
};

struct LoopDefaults {
  double if_hz = 20e6;
  std::optional<double> kp, ki;
  double crossover_hz = 100e3;
  double pi_zero_hz = 10e3;
  double actuator_bw_hz = 100e3;
  double sim_rate_hz = 50e6;
  double duration_s = 20e-3;
  double initial_freq_error_hz = 0.0;
};

inline void read_loop(const YamlReader& y, const YAML::Node& n, LoopDefaults& d) {
  y.expect_map(n, "loop", {"if_hz", "kp", "ki", "crossover_hz", "pi_zero_hz", "actuator_bw_hz",
                           "sim_rate_hz", "duration_s", "initial_freq_error_hz"});
  if (n["if_hz"]) d.if_hz = y.number(n["if_hz"], "loop.if_hz");
  if (n["kp"]) d.kp = y.number(n["kp"], "loop.kp");
  if (n["ki"]) d.ki = y.number(n["ki"], "loop.ki");
  if (n["crossover_hz"]) d.crossover_hz = y.number(n["crossover_hz"], "loop.crossover_hz");
  if (n["pi_zero_hz"]) d.pi_zero_hz = y.number(n["pi_zero_hz"], "loop.pi_zero_hz");
  if (n["actuator_bw_hz"]) d.actuator_bw_hz = y.number(n["actuator_bw_hz"], "loop.actuator_bw_hz");
  if (n["sim_rate_hz"]) d.sim_rate_hz = y.number(n["sim_rate_hz"], "loop.sim_rate_hz");
  if (n["duration_s"]) d.duration_s = y.number(n["duration_s"], "loop.duration_s");
  if (n["initial_freq_error_hz"])
    d.initial_freq_error_hz = y.number(n["initial_freq_error_hz"], "loop.initial_freq_error_hz");
  if (d.kp.has_value() != d.ki.has_value()) y.fail(n, "loop.kp and loop.ki must be given together");
}

inline LoopConfig make_loop(const LoopDefaults& d, double target_offset_hz) {
  LoopConfig cfg = d.kp ? LoopConfig{} : tuned_loop_config(target_offset_hz, d.crossover_hz, d.pi_zero_hz, d.actuator_bw_hz);
  cfg.target_offset_hz = target_offset_hz;
  if (d.kp) {
    cfg.kp = *d.kp;
    cfg.ki = *d.ki;
  }
  cfg.actuator_bw_hz = d.actuator_bw_hz;
  cfg.if_hz = d.if_hz;
  cfg.sim_rate_hz = d.sim_rate_hz;
  cfg.duration_s = d.duration_s;
  cfg.initial_freq_error_hz = d.initial_freq_error_hz;
  return cfg;
}

inline BandPlan read_plan(const YamlReader& y, const YAML::Node& n, BandId id) {
  y.expect_map(n, "plan", {"center_hz", "n_subcarriers", "spacing_hz", "null_indices", "detect_window_hz"});
  for (const char* k : {"center_hz", "n_subcarriers", "spacing_hz", "null_indices", "detect_window_hz"})
    if (!n[k]) y.fail(n, std::string("plan is missing '") + k + "'");
  BandPlan p;
  p.name = id;
  p.center_hz = y.number(n["center_hz"], "plan.center_hz");
  p.n_subcarriers = y.small_int(n["n_subcarriers"], "plan.n_subcarriers");
  p.spacing_hz = y.number(n["spacing_hz"], "plan.spacing_hz");
  const auto nulls = n["null_indices"];
  if (!nulls.IsSequence()) y.fail(nulls, "plan.null_indices must be a list");
  for (const auto& v : nulls) p.null_indices.push_back(y.small_int(v, "plan.null_indices"));
  std::sort(p.null_indices.begin(), p.null_indices.end());
  p.detect_window_hz = y.interval(n["detect_window_hz"], "plan.detect_window_hz");
  y.checked(n, [&] { p.validate(); });
  return p;
}

inline void read_tx(const YamlReader& y, const YAML::Node& n, TxConfig& tx) {
  y.expect_map(n, "tx", {"order", "n_symbols", "cp_fraction", "clip_ratio_db", "oversample", "prbs_order",
                         "prbs_seed", "n_training", "n_pilots"});
  if (n["order"]) tx.uniform_order = y.small_int(n["order"], "tx.order");
  if (n["n_symbols"]) tx.n_symbols = y.small_int(n["n_symbols"], "tx.n_symbols");
  if (n["cp_fraction"]) tx.cp_fraction = y.number(n["cp_fraction"], "tx.cp_fraction");
  if (n["clip_ratio_db"]) tx.clip_ratio_db = y.number(n["clip_ratio_db"], "tx.clip_ratio_db");
  if (n["oversample"]) tx.oversample = y.small_int(n["oversample"], "tx.oversample");
  if (n["prbs_order"]) tx.prbs_order = y.small_int(n["prbs_order"], "tx.prbs_order");
  if (n["prbs_seed"]) {
    const auto s = y.integer(n["prbs_seed"], "tx.prbs_seed");
    if (s > 0xFFFFFFFFULL) y.fail(n["prbs_seed"], "tx.prbs_seed must fit in 32 bits");
    tx.seed = static_cast<std::uint32_t>(s);
  }
  if (n["n_training"]) tx.n_training = y.small_int(n["n_training"], "tx.n_training");
  if (n["n_pilots"]) tx.n_pilots = y.small_int(n["n_pilots"], "tx.n_pilots");
  y.checked(n, [&] {
    tx.validate();
    Prbs probe(tx.prbs_order, tx.seed);
  });
}

inline BandMask read_mask(const YamlReader& y, const YAML::Node& ch, const std::filesystem::path& dir) {
  if (ch["mask"] && ch["mask_csv"]) y.fail(ch, "give either channel.mask or channel.mask_csv, not both");
  if (ch["mask_csv"]) {
    auto p = std::filesystem::path(y.text(ch["mask_csv"], "channel.mask_csv"));
    if (p.is_relative()) p = dir / p;
    return BandMask::from_csv(p.string());
  }
  const auto m = ch["mask"];
  if (!m) y.fail(ch, "channel needs 'mask' or 'mask_csv'");
  if (!m.IsSequence()) y.fail(m, "channel.mask must be a list of [freq_hz, gain_db] pairs");
  std::vector<MaskPoint> pts;
  for (const auto& pt : m) {
    if (!pt.IsSequence() || pt.size() != 2) y.fail(pt, "mask points must be [freq_hz, gain_db] pairs");
    pts.push_back({y.number(pt[0], "mask frequency"), y.number(pt[1], "mask gain")});
  }
  BandMask mask;
  y.checked(m, [&] { mask = BandMask(pts); });
  return mask;
}

}  // namespace detail

/**
 * @brief Parses a scenario file.
 *
 * `seed_override` replaces the top-level seed; stream seeds pinned explicitly
 * in the file stay pinned.
 */
inline Scenario load_scenario(const std::filesystem::path& path,
                              std::optional<std::uint64_t> seed_override = std::nullopt) {
  const std::string file = path.string();
  YAML::Node root;
  try {
    root = YAML::LoadFile(file);
  } catch (const YAML::BadFile&) {
    throw IoError("cannot read scenario " + file);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(file + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  const detail::YamlReader y(file);
  const auto dir = path.parent_path();
  y.expect_map(root, "scenario", {"schema_version", "seed", "spectrum_rbw_hz", "lock_rbw_hz",
                                  "lock_trace_stride", "fec", "lasers", "reference_laser", "loop", "bands"});
  if (!root["schema_version"]) y.fail(root, "missing schema_version");
  if (const auto v = y.small_int(root["schema_version"], "schema_version"); v != kSchemaVersion)
    y.fail(root["schema_version"], "unsupported schema_version " + std::to_string(v) + " (expected " +
                                       std::to_string(kSchemaVersion) + ")");

  Scenario sc;
  sc.source = path;
  if (root["seed"]) sc.seed = y.integer(root["seed"], "seed");
  if (seed_override) sc.seed = *seed_override;
  if (root["spectrum_rbw_hz"]) sc.link.rbw_hz = y.number(root["spectrum_rbw_hz"], "spectrum_rbw_hz");
  if (root["lock_rbw_hz"]) sc.lock_rbw_hz = y.number(root["lock_rbw_hz"], "lock_rbw_hz");
  if (root["lock_trace_stride"]) {
    sc.lock_trace_stride = y.integer(root["lock_trace_stride"], "lock_trace_stride");
    if (sc.lock_trace_stride == 0) y.fail(root["lock_trace_stride"], "lock_trace_stride must be >= 1");
  }
  if (!(sc.link.rbw_hz > 0.0)) y.fail(root["spectrum_rbw_hz"], "spectrum_rbw_hz must be positive");
  if (!(sc.lock_rbw_hz > 0.0)) y.fail(root["lock_rbw_hz"], "lock_rbw_hz must be positive");

  if (const auto f = root["fec"]) {
    y.expect_map(f, "fec", {"overhead_fraction", "ber_threshold"});
    if (f["overhead_fraction"]) sc.link.fec.overhead_fraction = y.number(f["overhead_fraction"], "fec.overhead_fraction");
    if (f["ber_threshold"]) sc.link.fec.ber_threshold = y.number(f["ber_threshold"], "fec.ber_threshold");
    y.checked(f, [&] { sc.link.fec.validate(); });
  }

  std::map<std::string, LaserSpec> lasers;
  const auto ln = root["lasers"];
  if (!ln || !ln.IsMap() || ln.size() == 0) y.fail(ln ? ln : root, "'lasers' must map labels to laser specs");
  for (const auto& kv : ln) {
    LaserSpec s;
    s.label = kv.first.as<std::string>();
    y.expect_map(kv.second, "laser " + s.label, {"linewidth_hz", "offset_hz"});
    if (!kv.second["linewidth_hz"]) y.fail(kv.second, "laser " + s.label + " needs linewidth_hz");
    s.linewidth_hz = y.number(kv.second["linewidth_hz"], s.label + ".linewidth_hz");
    if (kv.second["offset_hz"]) s.offset_hz = y.number(kv.second["offset_hz"], s.label + ".offset_hz");
    y.checked(kv.second, [&] { s.validate(); });
    lasers[s.label] = s;
  }
  const std::string ref_label = root["reference_laser"] ? y.text(root["reference_laser"], "reference_laser") : "LD1";
  if (!lasers.count(ref_label)) y.fail(root["reference_laser"] ? root["reference_laser"] : root, "unknown reference laser '" + ref_label + "'");
  sc.link.master = lasers[ref_label];
  if (sc.link.master.offset_hz != 0.0) y.fail(ln[ref_label], "the reference laser's offset_hz must be 0");

  detail::LoopDefaults loop_defaults;
  if (root["loop"]) detail::read_loop(y, root["loop"], loop_defaults);

  const auto bands = root["bands"];
  if (!bands || !bands.IsSequence() || bands.size() == 0) y.fail(bands ? bands : root, "'bands' must be a non-empty list");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto bn = bands[i];
    y.expect_map(bn, "band", {"name", "laser", "plan", "tx", "loop", "channel", "downconverter", "receiver", "lock_seed"});
    for (const char* k : {"name", "laser", "plan", "channel"})
      if (!bn[k]) y.fail(bn, std::string("band is missing '") + k + "'");
    const auto name = y.text(bn["name"], "band name");
    BandId id{};
    y.checked(bn["name"], [&] { id = band_from_string(name); });
    if (!seen.insert(to_string(id)).second) y.fail(bn["name"], "band " + name + " defined twice");

    BandSetup b;
    const auto label = y.text(bn["laser"], "band laser");
    if (!lasers.count(label)) y.fail(bn["laser"], "unknown laser '" + label + "'");
    if (label == ref_label) y.fail(bn["laser"], "a band cannot lock the reference laser to itself");
    b.slave = lasers[label];
    b.tx.plan = detail::read_plan(y, bn["plan"], id);
    if (bn["tx"]) detail::read_tx(y, bn["tx"], b.tx);
    else y.checked(bn, [&] { b.tx.validate(); });

    auto loop_d = loop_defaults;
    if (bn["loop"]) detail::read_loop(y, bn["loop"], loop_d);
    b.loop = detail::make_loop(loop_d, b.slave.offset_hz - sc.link.master.offset_hz);
    y.checked(bn["loop"] ? bn["loop"] : bn, [&] { b.loop.validate(); });

    const auto stream = 16 * static_cast<std::uint64_t>(i);
    b.lock_seed = bn["lock_seed"] ? y.integer(bn["lock_seed"], "lock_seed") : derive_seed(sc.seed, stream + 1);
    b.channel.noise_seed = derive_seed(sc.seed, stream + 2);
    b.floor_seed = derive_seed(sc.seed, stream + 3);

    const auto ch = bn["channel"];
    y.expect_map(ch, "channel", {"mask", "mask_csv", "snr_db", "tx_snr_floor_db", "distance_m",
                                 "antenna_gain_dbi", "noise_seed"});
    b.channel.mask = detail::read_mask(y, ch, dir);
    if (ch["snr_db"]) b.channel.target_snr_db = y.optional_number(ch["snr_db"], "channel.snr_db");
    if (ch["tx_snr_floor_db"]) b.channel.tx_snr_floor_db = y.optional_number(ch["tx_snr_floor_db"], "channel.tx_snr_floor_db");
    if (ch["distance_m"]) b.channel.distance_m = y.number(ch["distance_m"], "channel.distance_m");
    if (ch["antenna_gain_dbi"]) b.channel.antenna_gain_dbi = y.number(ch["antenna_gain_dbi"], "channel.antenna_gain_dbi");
    if (ch["noise_seed"]) b.channel.noise_seed = y.integer(ch["noise_seed"], "channel.noise_seed");
    y.checked(ch, [&] { b.channel.validate(b.tx.plan); });

    if (const auto dc = bn["downconverter"]) {
      y.expect_map(dc, "downconverter", {"seed_lo_hz", "multiplier", "if_window_hz"});
      DownconverterConfig d;
      if (dc["seed_lo_hz"]) d.seed_lo_hz = y.number(dc["seed_lo_hz"], "downconverter.seed_lo_hz");
      if (dc["multiplier"]) d.multiplier = y.small_int(dc["multiplier"], "downconverter.multiplier");
      if (dc["if_window_hz"]) d.if_window_hz = y.interval(dc["if_window_hz"], "downconverter.if_window_hz");
      if (!(d.seed_lo_hz > 0.0) || d.multiplier < 1) y.fail(dc, "downconverter LO must be positive");
      b.downconverter = d;
    }
    if (const auto rx = bn["receiver"]) {
      y.expect_map(rx, "receiver", {"remove_cpe", "guard_samples"});
      if (rx["remove_cpe"]) b.equalizer.remove_cpe = y.boolean(rx["remove_cpe"], "receiver.remove_cpe");
      if (rx["guard_samples"]) b.guard_samples = y.integer(rx["guard_samples"], "receiver.guard_samples");
    }
    sc.link.bands.push_back(std::move(b));
  }
  return sc;
}

}  // namespace wdlink
