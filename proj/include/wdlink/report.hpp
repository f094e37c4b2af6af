#pragma once

/**
 * @file report.hpp
 * @brief summary.json built purely from the CSV files in an output directory.
 *
 * Each band leaves `<band>_status.csv` (scalar results and the plan needed
 * for capacity arithmetic) and, when bits were loaded, `<band>_bitload.csv`
 * and `<band>_metrics.csv`. Rebuilding the summary from those files is how
 * both `run` and `report` produce it, so the two always agree.
 */

#include <openssl/evp.h>

#include <filesystem>
#include <json.hpp>

#include "wdlink/bitload.hpp"
#include "wdlink/io.hpp"

namespace wdlink {

inline constexpr const char* kSummaryFile = "summary.json";

inline std::string sha256_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("SHA-256 unavailable");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

namespace detail {

inline nlohmann::json typed_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.empty()) return s;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) {
      const bool integral = s.find_first_of(".eE") == std::string::npos;
      if (integral && std::abs(v) < 9e15) return static_cast<long long>(v);
      return v;
    }
  } catch (const std::exception&) {
  }
  return s;
}

inline std::vector<int> parse_index_list(const std::string& s, const std::string& where) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ';'))
    if (!cell.empty()) out.push_back(static_cast<int>(io::parse_double(cell, where)));
  return out;
}

inline std::string need(const std::map<std::string, std::string>& kv, const std::string& key,
                        const std::filesystem::path& file) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError(file.string() + ": missing key '" + key + "'");
  return it->second;
}

}  // namespace detail

/// Plan fields recorded in a status file, in the form read back by the report.
inline void append_plan(io::KeyValues& kv, const BandPlan& plan) {
  std::string nulls;
  for (int k : plan.null_indices) nulls += (nulls.empty() ? "" : ";") + std::to_string(k);
  kv.emplace_back("band", to_string(plan.name));
  kv.emplace_back("center_hz", io::fmt(plan.center_hz));
  kv.emplace_back("n_subcarriers", std::to_string(plan.n_subcarriers));
  kv.emplace_back("spacing_hz", io::fmt(plan.spacing_hz));
  kv.emplace_back("null_indices", nulls);
  kv.emplace_back("detect_lo_hz", io::fmt(plan.detect_window_hz.lo_hz));
  kv.emplace_back("detect_hi_hz", io::fmt(plan.detect_window_hz.hi_hz));
}

inline BandPlan plan_from_status(const std::map<std::string, std::string>& kv, const std::filesystem::path& f) {
  const auto num = [&](const std::string& k) { return io::parse_double(detail::need(kv, k, f), f.string()); };
  BandPlan p;
  p.name = band_from_string(detail::need(kv, "band", f));
  p.center_hz = num("center_hz");
  p.n_subcarriers = static_cast<int>(num("n_subcarriers"));
  p.spacing_hz = num("spacing_hz");
  p.null_indices = detail::parse_index_list(detail::need(kv, "null_indices", f), f.string());
  p.detect_window_hz = {num("detect_lo_hz"), num("detect_hi_hz")};
  p.validate();
  return p;
}

/**
 * @brief Builds the summary from the files in `dir` (excluding summary.json itself).
 */
inline nlohmann::json build_summary(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != kSummaryFile) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  nlohmann::json j;
  j["schema_version"] = 1;
  j["bands"] = nlohmann::json::object();
  std::vector<BandCapacity> caps;
  for (const auto& f : files) {
    const auto name = f.filename().string();
    const std::string suffix = "_status.csv";
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    const auto kv = io::read_key_values(f);
    const auto band = detail::need(kv, "band", f);
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [k, v] : kv) b[k] = detail::typed_value(v);

    const auto bitload_path = dir / (band + "_bitload.csv");
    if (fs::exists(bitload_path)) {
      const auto plan = plan_from_status(kv, f);
      FecProfile fec;
      fec.overhead_fraction = io::parse_double(detail::need(kv, "fec_overhead_fraction", f), f.string());
      fec.ber_threshold = io::parse_double(detail::need(kv, "fec_ber_threshold", f), f.string());
      const double cp = io::parse_double(detail::need(kv, "cp_fraction", f), f.string());
      const auto map = io::read_bitload(bitload_path, plan.n_subcarriers);
      const auto c = capacity(map, plan, fec, cp);
      caps.push_back(c);
      b["capacity"] = {{"raw_gbps", c.raw_gbps},
                       {"raw_cp_gbps", c.raw_cp_gbps},
                       {"net_gbps", c.net_gbps},
                       {"detected_subcarriers", c.detected_subcarriers},
                       {"loaded_subcarriers", c.loaded_subcarriers},
                       {"bits_per_symbol", c.bits_per_symbol}};
      nlohmann::json hist = nlohmann::json::object();
      for (int o = 0; o <= kMaxOrderBits; ++o)
        hist[order_name(o)] = std::count(map.bits.begin(), map.bits.end(), o);
      b["bit_histogram"] = hist;

      const auto metrics_path = dir / (band + "_metrics.csv");
      if (fs::exists(metrics_path)) {
        const auto det = detected_indices(plan);
        const double avg = io::read_metrics(metrics_path).average_snr_db(&det);
        b["average_snr_db"] = std::isfinite(avg) ? nlohmann::json(avg) : nlohmann::json(nullptr);
      }
    }
    j["bands"][band] = b;
  }
  if (!caps.empty()) {
    const auto total = combine(caps);
    j["totals"] = {{"raw_gbps", total.total_raw_gbps},
                   {"raw_cp_gbps", total.total_raw_cp_gbps},
                   {"net_gbps", total.total_net_gbps}};
  }
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& f : files)
    manifest.push_back({{"file", f.filename().string()},
                        {"bytes", static_cast<long long>(fs::file_size(f))},
                        {"sha256", sha256_file(f)}});
  j["manifest"] = manifest;
  return j;
}

inline nlohmann::json write_summary(const std::filesystem::path& dir) {
  const auto j = build_summary(dir);
  const auto p = dir / kSummaryFile;
  auto out = io::open_out(p);
  out << j.dump(2) << '\n';
  io::check_written(out, p);
  return j;
}

}  // namespace wdlink
