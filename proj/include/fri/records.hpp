#pragma once
// Run persistence: JSON-lines rows, a single aggregates document, a run
// manifest with a config digest, and CSV plot-data emission.  Aggregates are
// recomputed from the persisted row text before anything is written, so a
// run directory can never hold aggregates that disagree with its rows.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fri/config.hpp"
#include "fri/experiments.hpp"

namespace fri {

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4), used for config digests in manifests.

namespace detail {

struct Sha256 {
  uint32_t h[8] = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                   0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
  uint8_t buf[64] = {};
  uint64_t total = 0;
  size_t fill = 0;

  static uint32_t rotr(uint32_t x, int n) {
    return (x >> n) | (x << (32 - n));
  }

  void block(const uint8_t* p) {
    static constexpr uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b,
        0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01,
        0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7,
        0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc,
        0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152,
        0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
        0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
        0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08,
        0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f,
        0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t(p[4 * i]) << 24) | (uint32_t(p[4 * i + 1]) << 16) |
             (uint32_t(p[4 * i + 2]) << 8) | uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const uint32_t s0 =
          rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const uint32_t s1 =
          rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5],
             g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      const uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const uint32_t ch = (e & f) ^ (~e & g);
      const uint32_t t1 = hh + s1 + ch + k[i] + w[i];
      const uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const uint32_t t2 = s0 + maj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
    h[5] += f;
    h[6] += g;
    h[7] += hh;
  }

  void update(const uint8_t* p, size_t n) {
    total += n;
    while (n > 0) {
      const size_t take = std::min(n, size_t{64} - fill);
      std::copy(p, p + take, buf + fill);
      fill += take;
      p += take;
      n -= take;
      if (fill == 64) {
        block(buf);
        fill = 0;
      }
    }
  }

  std::array<uint8_t, 32> finish() {
    const uint64_t bits = total * 8;
    const uint8_t one = 0x80;
    update(&one, 1);
    const uint8_t zero = 0;
    while (fill != 56) update(&zero, 1);
    uint8_t len[8];
    for (int i = 0; i < 8; ++i)
      len[i] = static_cast<uint8_t>(bits >> (56 - 8 * i));
    update(len, 8);
    std::array<uint8_t, 32> out{};
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 4; ++j)
        out[static_cast<size_t>(4 * i + j)] =
            static_cast<uint8_t>(h[i] >> (24 - 8 * j));
    return out;
  }
};

}  // namespace detail

inline std::string sha256_hex(const std::string& data) {
  detail::Sha256 s;
  s.update(reinterpret_cast<const uint8_t*>(data.data()), data.size());
  const std::array<uint8_t, 32> digest = s.finish();
  static const char* hexd = "0123456789abcdef";
  std::string out(64, '0');
  for (size_t i = 0; i < 32; ++i) {
    out[2 * i] = hexd[digest[i] >> 4];
    out[2 * i + 1] = hexd[digest[i] & 0xF];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small file / formatting helpers.

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(),
            static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char out[32];
  std::strftime(out, sizeof(out), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return out;
}

// CSV number: '.' decimal separator, shortest exact form, "inf"/"nan"
// literals for non-finite values.
inline std::string csv_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return json(v).dump();
}

// ---------------------------------------------------------------------------
// Plot data: per-kind CSV series derived from an aggregates document.
// Returns (filename, content) pairs.

inline std::vector<std::pair<std::string, std::string>> emit_plot_data(
    const json& aggregates) {
  if (!aggregates.contains("kind"))
    throw std::invalid_argument("plot data: record has no 'kind' field");
  const std::string kind = aggregates.at("kind").get<std::string>();
  const auto num = [](const json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                       : v.get<double>();
  };
  std::vector<std::pair<std::string, std::string>> out;
  if (kind == "crossing") {
    std::string csv = "N,freq,lo,hi\n";
    for (const json& r : aggregates.at("per_N"))
      csv += std::to_string(r.at("N").get<int64_t>()) + "," +
             csv_num(num(r.at("frequency"))) + "," +
             csv_num(num(r.at("wilson_lo"))) + "," +
             csv_num(num(r.at("wilson_hi"))) + "\n";
    out.emplace_back("crossing.csv", std::move(csv));
  } else if (kind == "uniqueness") {
    std::string csv = "R,freq,lo,hi\n";
    for (const json& r : aggregates.at("per_R"))
      csv += std::to_string(r.at("R").get<int64_t>()) + "," +
             csv_num(num(r.at("frequency"))) + "," +
             csv_num(num(r.at("wilson_lo"))) + "," +
             csv_num(num(r.at("wilson_hi"))) + "\n";
    out.emplace_back("uniqueness.csv", std::move(csv));
  } else if (kind == "chemdist") {
    std::string csv = "r,mean_ratio,lo,hi\n";
    for (const json& t : aggregates.at("targets")) {
      const json& ratio = t.at("ratio");
      double mean = std::numeric_limits<double>::quiet_NaN();
      double se = std::numeric_limits<double>::quiet_NaN();
      if (ratio.contains("mean")) {
        mean = num(ratio.at("mean"));
        se = num(ratio.at("stderr"));
      }
      csv += std::to_string(t.at("r").get<int64_t>()) + "," +
             csv_num(mean) + "," + csv_num(mean - 1.959963984540054 * se) +
             "," + csv_num(mean + 1.959963984540054 * se) + "\n";
    }
    out.emplace_back("chemdist.csv", std::move(csv));
  } else if (kind == "shape") {
    std::string csv = "n_from,n_to,step,lo,hi\n";
    for (const json& s : aggregates.at("steps")) {
      const json& st = s.at("step");
      double mean = std::numeric_limits<double>::quiet_NaN();
      double se = std::numeric_limits<double>::quiet_NaN();
      if (st.contains("mean")) {
        mean = num(st.at("mean"));
        se = num(st.at("stderr"));
      }
      csv += std::to_string(s.at("n_from").get<int64_t>()) + "," +
             std::to_string(s.at("n_to").get<int64_t>()) + "," +
             csv_num(mean) + "," + csv_num(mean - 1.959963984540054 * se) +
             "," + csv_num(mean + 1.959963984540054 * se) + "\n";
    }
    out.emplace_back("shape.csv", std::move(csv));
  } else if (kind == "t_sweep") {
    std::string csv = "T,slope,lo,hi\n";
    for (const json& e : aggregates.at("per_T"))
      csv += csv_num(num(e.at("T"))) + "," + csv_num(num(e.at("slope"))) +
             "," + csv_num(num(e.at("slope_lo"))) + "," +
             csv_num(num(e.at("slope_hi"))) + "\n";
    out.emplace_back("tsweep.csv", std::move(csv));
  } else {
    throw std::invalid_argument("plot data: no series defined for kind '" +
                                kind + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run directory writer.

struct RunManifestInfo {
  std::string version = kToolVersion;
  int threads_resolved = 1;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;
};

struct RunOutput {
  std::filesystem::path rows_path;
  std::filesystem::path aggregates_path;
  std::filesystem::path manifest_path;
};

// Writes rows.jsonl, aggregates.json, and manifest.json into `dir`.
// Before writing, the aggregates are recomputed from the serialized row text
// and must match byte-for-byte; a mismatch is a logic error.
inline RunOutput write_run(const std::filesystem::path& dir,
                           const ExperimentConfig& cfg,
                           const ExperimentResult& result,
                           const RunManifestInfo& info) {
  std::filesystem::create_directories(dir);

  std::string rows_text;
  for (const std::string& r : result.rows) {
    rows_text += r;
    rows_text += '\n';
  }
  {
    std::vector<json> reparsed;
    reparsed.reserve(result.rows.size());
    std::istringstream in(rows_text);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) reparsed.push_back(json::parse(line));
    const json again = aggregate_rows(cfg, reparsed);
    if (again.dump() != result.aggregates.dump())
      throw std::logic_error(
          "aggregate crosscheck failed: recomputation from serialized rows "
          "differs");
  }

  const std::string config_text = write_config(cfg);
  json manifest;
  manifest["version"] = info.version;
  manifest["kind"] = kind_name(cfg.kind);
  manifest["master_seed"] = cfg.seed;
  manifest["threads"] = info.threads_resolved;
  manifest["config_digest"] = "sha256:" + sha256_hex(config_text);
  manifest["config_text"] = config_text;
  manifest["started_utc"] = utc_timestamp(info.started);
  manifest["finished_utc"] = utc_timestamp(info.finished);
  manifest["row_count"] = static_cast<int64_t>(result.rows.size());
  manifest["status"] =
      result.failed_checks.empty() ? "ok" : "checks_failed";
  manifest["failed_checks"] = result.failed_checks;
  json outputs;
  outputs["rows"] = "rows.jsonl";
  outputs["aggregates"] = "aggregates.json";
  manifest["outputs"] = std::move(outputs);

  RunOutput out;
  out.rows_path = dir / "rows.jsonl";
  out.aggregates_path = dir / "aggregates.json";
  out.manifest_path = dir / "manifest.json";
  write_text_file(out.rows_path, rows_text);
  write_text_file(out.aggregates_path, result.aggregates.dump(2) + "\n");
  write_text_file(out.manifest_path, manifest.dump(2) + "\n");
  return out;
}

}  // namespace fri
