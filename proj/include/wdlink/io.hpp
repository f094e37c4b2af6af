#pragma once

/**
 * @file io.hpp
 * @brief CSV and binary I/Q readers and writers.
 *
 * Numbers are written with 17 significant digits so that reading a file back
 * reproduces the in-memory doubles exactly.
 */

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "wdlink/bitload.hpp"
#include "wdlink/noise.hpp"
#include "wdlink/ofdm_rx.hpp"
#include "wdlink/ofdm_tx.hpp"
#include "wdlink/opll.hpp"

namespace wdlink::io {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(where + ": not a number: '" + s + "'");
  return v;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

inline void check_written(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw IoError("write failed for " + p.string());
}

/// Header-indexed CSV table; cells are kept as strings.
struct CsvTable {
  std::filesystem::path path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;  // 1-based source line of each row

  [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  [[nodiscard]] std::size_t require_column(const std::string& name) const {
    const auto c = column(name);
    if (!c) throw ConfigError(path.string() + ": missing column '" + name + "'");
    return *c;
  }

  [[nodiscard]] double number(std::size_t row, std::size_t col) const {
    return parse_double(rows[row][col], path.string() + ":" + std::to_string(row_lines[row]));
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CsvTable read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  CsvTable t;
  t.path = p;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError(p.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " columns");
    t.rows.push_back(std::move(cells));
    t.row_lines.push_back(lineno);
  }
  if (t.header.empty()) throw ConfigError(p.string() + ": empty CSV file");
  return t;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_key_values(const std::filesystem::path& p, const KeyValues& kv) {
  auto out = open_out(p);
  out << "key,value\n";
  for (const auto& [k, v] : kv) out << k << ',' << v << '\n';
  check_written(out, p);
}

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& p) {
  const auto t = read_csv(p);
  const auto k = t.require_column("key");
  const auto v = t.require_column("value");
  std::map<std::string, std::string> out;
  for (const auto& r : t.rows) out[r[k]] = r[v];
  return out;
}

inline void write_metrics(const std::filesystem::path& p, const SubcarrierMetrics& m) {
  auto out = open_out(p);
  out << "index,freq_hz,snr_db,evm_rms,n_symbols\n";
  for (const auto& s : m.items)
    out << s.index << ',' << fmt(s.freq_hz) << ',' << fmt(s.snr_db) << ',' << fmt(s.evm_rms) << ','
        << s.n_symbols << '\n';
  check_written(out, p);
}

/**
 * Reads per-subcarrier SNRs. Requires `index` and `snr_db` columns; `freq_hz`,
 * `evm_rms` and `n_symbols` are optional. A NaN SNR marks an unavailable subcarrier.
 */
inline SubcarrierMetrics read_metrics(const std::filesystem::path& p) {
  const auto t = read_csv(p);
  const auto ci = t.require_column("index");
  const auto cs = t.require_column("snr_db");
  const auto cf = t.column("freq_hz");
  const auto ce = t.column("evm_rms");
  const auto cn = t.column("n_symbols");
  SubcarrierMetrics m;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    SubcarrierMetric s;
    const double idx = t.number(r, ci);
    if (idx < 0 || idx != std::floor(idx))
      throw ConfigError(p.string() + ":" + std::to_string(t.row_lines[r]) + ": bad subcarrier index");
    s.index = static_cast<int>(idx);
    s.snr_db = t.number(r, cs);
    s.available = std::isfinite(s.snr_db);
    s.freq_hz = cf ? t.number(r, *cf) : 0.0;
    s.evm_rms = ce ? t.number(r, *ce) : std::pow(10.0, -s.snr_db / 20.0);
    s.n_symbols = cn ? static_cast<int>(t.number(r, *cn)) : 0;
    m.items.push_back(s);
  }
  return m;
}

inline void write_bitload(const std::filesystem::path& p, const BitLoadMap& map, const BandPlan& plan) {
  auto out = open_out(p);
  out << "index,freq_hz,bits\n";
  for (std::size_t k = 0; k < map.size(); ++k)
    out << k << ',' << fmt(subcarrier_center(plan, static_cast<int>(k))) << ',' << map.bits[k] << '\n';
  check_written(out, p);
}

inline BitLoadMap read_bitload(const std::filesystem::path& p, int n_subcarriers) {
  const auto t = read_csv(p);
  const auto ci = t.require_column("index");
  const auto cb = t.require_column("bits");
  BitLoadMap map = BitLoadMap::uniform(n_subcarriers, 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double idx = t.number(r, ci);
    const double b = t.number(r, cb);
    const std::string where = p.string() + ":" + std::to_string(t.row_lines[r]);
    if (idx < 0 || idx >= n_subcarriers || idx != std::floor(idx)) throw ConfigError(where + ": bad index");
    if (b < 0 || b > kMaxOrderBits || b != std::floor(b)) throw ConfigError(where + ": bad bit count");
    map.bits[static_cast<std::size_t>(idx)] = static_cast<int>(b);
  }
  return map;
}

inline void write_thresholds(const std::filesystem::path& p, const FecProfile& fec) {
  auto out = open_out(p);
  out << "bits,name,min_snr_db\n";
  for (const auto& [b, snr] : threshold_table(fec)) out << b << ',' << order_name(b) << ',' << fmt(snr) << '\n';
  check_written(out, p);
}

/// Two columns: frequency and density in dB relative to 1 (unit)^2/Hz, optionally limited to [lo, hi].
inline void write_psd(const std::filesystem::path& p, const Psd& psd,
                      double lo_hz = -std::numeric_limits<double>::infinity(),
                      double hi_hz = std::numeric_limits<double>::infinity()) {
  auto out = open_out(p);
  out << "freq_hz,density_db_per_hz\n";
  for (std::size_t i = 0; i < psd.size(); ++i)
    if (psd.freq_hz[i] >= lo_hz && psd.freq_hz[i] <= hi_hz)
      out << fmt(psd.freq_hz[i]) << ',' << fmt(10.0 * std::log10(std::max(psd.density[i], 1e-300))) << '\n';
  check_written(out, p);
}

inline void write_constellation(const std::filesystem::path& p, const std::vector<cplx>& rx,
                                const std::vector<cplx>& sent) {
  auto out = open_out(p);
  out << "symbol,i,q,ref_i,ref_q\n";
  for (std::size_t s = 0; s < rx.size(); ++s)
    out << s << ',' << fmt(rx[s].real()) << ',' << fmt(rx[s].imag()) << ',' << fmt(sent[s].real()) << ','
        << fmt(sent[s].imag()) << '\n';
  check_written(out, p);
}

/// Every `stride`-th loop sample.
inline void write_lock_trace(const std::filesystem::path& p, const LockResult& r, std::size_t stride) {
  require(stride >= 1, "trace stride must be >= 1");
  auto out = open_out(p);
  out << "time_s,phase_error_rad,freq_error_hz\n";
  const double fs = r.phase_error.sample_rate_hz;
  for (std::size_t i = 0; i < r.phase_error.size(); i += stride)
    out << fmt(static_cast<double>(i) / fs) << ',' << fmt(r.phase_error.phases[i]) << ','
        << fmt(r.freq_error[i]) << '\n';
  check_written(out, p);
}

inline void write_frame_ref(const std::filesystem::path& p, const FrameRef& ref) {
  auto out = open_out(p);
  out << "symbol,kind,subcarrier,bits,pilot,i,q\n";
  auto emit = [&](const std::vector<std::vector<cplx>>& rows, const char* kind, int base, bool training) {
    for (std::size_t s = 0; s < rows.size(); ++s)
      for (int k : ref.active) {
        const auto ku = static_cast<std::size_t>(k);
        const bool pilot = std::binary_search(ref.pilots.begin(), ref.pilots.end(), k);
        out << base + static_cast<int>(s) << ',' << kind << ',' << k << ','
            << (training ? 2 : ref.bits[ku]) << ',' << pilot << ',' << fmt(rows[s][ku].real()) << ','
            << fmt(rows[s][ku].imag()) << '\n';
      }
  };
  emit(ref.training, "training", 0, true);
  emit(ref.payload, "payload", ref.n_training(), false);
  check_written(out, p);
}

/**
 * @brief Writes `<base>` as little-endian float32 I/Q pairs and `<base>.hdr`
 * with sample_rate_hz, anchor_hz, lo_hz and count.
 */
inline void write_iq(const std::filesystem::path& base, const ComplexWaveform& w) {
  auto out = open_out(base, true);
  std::vector<char> buf(w.size() * 8);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::array<float, 2> v{static_cast<float>(w.samples[i].real()),
                                 static_cast<float>(w.samples[i].imag())};
    for (std::size_t c = 0; c < 2; ++c) {
      auto bits = std::bit_cast<std::uint32_t>(v[c]);
      if constexpr (std::endian::native == std::endian::big)
        bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
      std::memcpy(buf.data() + i * 8 + c * 4, &bits, 4);
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_written(out, base);

  auto hdr_path = base;
  hdr_path += ".hdr";
  auto hdr = open_out(hdr_path);
  hdr << "sample_rate_hz=" << fmt(w.sample_rate_hz) << "\nanchor_hz=" << fmt(w.anchor_hz)
      << "\nlo_hz=" << fmt(w.lo_hz) << "\ncount=" << w.size() << '\n';
  check_written(hdr, hdr_path);
}

inline ComplexWaveform read_iq(const std::filesystem::path& base) {
  auto hdr_path = base;
  hdr_path += ".hdr";
  std::ifstream hdr(hdr_path);
  if (!hdr) throw IoError("cannot read " + hdr_path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(hdr, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"sample_rate_hz", "anchor_hz", "count"})
    if (!kv.count(key)) throw ConfigError(hdr_path.string() + ": missing " + key);
  ComplexWaveform w;
  w.sample_rate_hz = parse_double(kv["sample_rate_hz"], hdr_path.string());
  w.anchor_hz = parse_double(kv["anchor_hz"], hdr_path.string());
  w.lo_hz = kv.count("lo_hz") ? parse_double(kv["lo_hz"], hdr_path.string()) : 0.0;
  const auto count = static_cast<std::size_t>(parse_double(kv["count"], hdr_path.string()));

  std::ifstream in(base, std::ios::binary);
  if (!in) throw IoError("cannot read " + base.string());
  std::vector<char> buf(count * 8);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw IoError(base.string() + ": shorter than the header's count");
  w.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::array<float, 2> v{};
    for (std::size_t c = 0; c < 2; ++c) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, buf.data() + i * 8 + c * 4, 4);
      if constexpr (std::endian::native == std::endian::big)
        bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
      v[c] = std::bit_cast<float>(bits);
    }
    w.samples[i] = cplx(v[0], v[1]);
  }
  return w;
}

}  // namespace wdlink::io
