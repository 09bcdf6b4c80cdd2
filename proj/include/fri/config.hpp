#pragma once
// Experiment configuration files: flat `key = value` text with one section
// per experiment kind.  Parsing is strict — unknown sections, unknown keys,
// duplicate keys, and malformed values are errors naming the offender and
// its line.  write_config() emits a canonical form (fixed key order, all
// sections) such that parse_config_text(write_config(cfg)) == cfg.

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fri/experiments.hpp"

namespace fri {

namespace detail {

inline std::string cfg_trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] inline void cfg_fail(int line, const std::string& msg) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " +
                              msg);
}

inline double cfg_double(const std::string& v, int line,
                         const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE)
    cfg_fail(line, "key '" + key + "': bad number '" + v + "'");
  return x;
}

inline int64_t cfg_int(const std::string& v, int line,
                       const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE)
    cfg_fail(line, "key '" + key + "': bad integer '" + v + "'");
  return static_cast<int64_t>(x);
}

inline uint64_t cfg_uint(const std::string& v, int line,
                         const std::string& key) {
  errno = 0;
  char* end = nullptr;
  if (!v.empty() && v[0] == '-')
    cfg_fail(line, "key '" + key + "': negative value '" + v + "'");
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE)
    cfg_fail(line, "key '" + key + "': bad integer '" + v + "'");
  return static_cast<uint64_t>(x);
}

inline bool cfg_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  cfg_fail(line, "key '" + key + "': expected true or false, got '" + v + "'");
}

template <typename T, typename Parse>
inline std::vector<T> cfg_list(const std::string& v, int line,
                               const std::string& key, Parse parse) {
  std::vector<T> out;
  size_t pos = 0;
  while (pos <= v.size()) {
    const size_t comma = v.find(',', pos);
    const std::string item = cfg_trim(
        v.substr(pos, comma == std::string::npos ? std::string::npos
                                                 : comma - pos));
    if (item.empty()) cfg_fail(line, "key '" + key + "': empty list item");
    out.push_back(parse(item, line, key));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::vector<int32_t> cfg_int_list(const std::string& v, int line,
                                         const std::string& key) {
  return cfg_list<int32_t>(v, line, key,
                           [](const std::string& s, int l,
                              const std::string& k) {
                             return static_cast<int32_t>(cfg_int(s, l, k));
                           });
}

inline std::vector<double> cfg_double_list(const std::string& v, int line,
                                           const std::string& key) {
  return cfg_list<double>(v, line, key, cfg_double);
}

// Canonical number rendering: shortest text that parses back exactly.
inline std::string cfg_num(double v) { return json(v).dump(); }

template <typename T>
inline std::string cfg_join(const std::vector<T>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += cfg_num(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
  using detail::cfg_fail;
  ExperimentConfig cfg;
  std::string section;  // "" = global
  std::vector<std::string> seen;  // "section\x1fkey"
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const size_t hash = raw.find_first_of("#;");
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = detail::cfg_trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') cfg_fail(line, "unterminated section header");
      section = detail::cfg_trim(s.substr(1, s.size() - 2));
      if (section == "tsweep") section = "t_sweep";
      static const char* kSections[] = {"chemdist", "shape",    "uniqueness",
                                        "crossing", "qip",      "validate",
                                        "t_sweep"};
      bool ok = false;
      for (const char* k : kSections) ok = ok || section == k;
      if (!ok) cfg_fail(line, "unknown section '" + section + "'");
      continue;
    }
    const size_t eq = s.find('=');
    if (eq == std::string::npos) cfg_fail(line, "expected 'key = value'");
    const std::string key = detail::cfg_trim(s.substr(0, eq));
    const std::string val = detail::cfg_trim(s.substr(eq + 1));
    if (key.empty()) cfg_fail(line, "empty key");
    if (val.empty()) cfg_fail(line, "key '" + key + "': empty value");
    const std::string scope_key = section + "\x1f" + key;
    for (const std::string& sk : seen)
      if (sk == scope_key)
        cfg_fail(line, "duplicate key '" + key + "'" +
                           (section.empty() ? "" : " in section [" + section +
                                                       "]"));
    seen.push_back(scope_key);

    using namespace detail;
    if (section.empty()) {
      if (key == "kind") {
        try {
          cfg.kind = kind_from_name(val);
        } catch (const std::exception& e) {
          cfg_fail(line, e.what());
        }
      } else if (key == "d") {
        cfg.fri.d = static_cast<int>(cfg_int(val, line, key));
      } else if (key == "u") {
        cfg.fri.u = cfg_double(val, line, key);
      } else if (key == "T") {
        cfg.fri.T = cfg_double(val, line, key);
      } else if (key == "N") {
        cfg.window_radius = static_cast<int32_t>(cfg_int(val, line, key));
      } else if (key == "replicas") {
        cfg.replicas = cfg_int(val, line, key);
      } else if (key == "margin") {
        cfg.margin = static_cast<int>(cfg_int(val, line, key));
      } else if (key == "margin_epsilon") {
        cfg.margin_epsilon = cfg_double(val, line, key);
      } else if (key == "seed") {
        cfg.seed = cfg_uint(val, line, key);
      } else if (key == "threads") {
        cfg.threads = static_cast<int>(cfg_int(val, line, key));
      } else if (key == "significance") {
        cfg.significance = cfg_double(val, line, key);
      } else if (key == "max_expected_steps") {
        cfg.max_expected_steps = cfg_double(val, line, key);
      } else {
        cfg_fail(line, "unknown key '" + key + "'");
      }
    } else if (section == "chemdist") {
      if (key == "targets")
        cfg.target_radii = cfg_int_list(val, line, key);
      else
        cfg_fail(line, "unknown key '" + key + "' in section [chemdist]");
    } else if (section == "shape") {
      if (key == "n_grid")
        cfg.n_grid = cfg_int_list(val, line, key);
      else if (key == "grid")
        cfg.shape_grid = static_cast<int32_t>(cfg_int(val, line, key));
      else
        cfg_fail(line, "unknown key '" + key + "' in section [shape]");
    } else if (section == "uniqueness") {
      if (key == "r_grid")
        cfg.r_grid = cfg_int_list(val, line, key);
      else
        cfg_fail(line, "unknown key '" + key + "' in section [uniqueness]");
    } else if (section == "crossing") {
      if (key == "grid")
        cfg.cross_grid = cfg_int_list(val, line, key);
      else if (key == "axis")
        cfg.crossing_axis = static_cast<int>(cfg_int(val, line, key));
      else
        cfg_fail(line, "unknown key '" + key + "' in section [crossing]");
    } else if (section == "qip") {
      if (key == "horizon")
        cfg.walk_horizon = cfg_int(val, line, key);
      else if (key == "walks")
        cfg.walks_per_replica = cfg_int(val, line, key);
      else if (key == "all_occupied")
        cfg.qip_all_occupied = cfg_bool(val, line, key);
      else
        cfg_fail(line, "unknown key '" + key + "' in section [qip]");
    } else if (section == "validate") {
      if (key == "k_radius")
        cfg.k_radius = static_cast<int32_t>(cfg_int(val, line, key));
      else if (key == "site_law_radius")
        cfg.site_law_radius = static_cast<int32_t>(cfg_int(val, line, key));
      else if (key == "thin_replicas")
        cfg.thin_replicas = cfg_int(val, line, key);
      else if (key == "thin_window")
        cfg.thin_window = static_cast<int32_t>(cfg_int(val, line, key));
      else if (key == "lucky_replicas")
        cfg.lucky_replicas = cfg_int(val, line, key);
      else if (key == "lucky_window")
        cfg.lucky_window = static_cast<int32_t>(cfg_int(val, line, key));
      else if (key == "lucky_radii")
        cfg.lucky_radii = cfg_int_list(val, line, key);
      else if (key == "lucky_T")
        cfg.lucky_t = cfg_double(val, line, key);
      else if (key == "lucky_inner")
        cfg.lucky_inner = cfg_double(val, line, key);
      else if (key == "lucky_outer")
        cfg.lucky_outer = cfg_double(val, line, key);
      else
        cfg_fail(line, "unknown key '" + key + "' in section [validate]");
    } else if (section == "t_sweep") {
      if (key == "T_grid")
        cfg.t_grid = cfg_double_list(val, line, key);
      else if (key == "targets")
        cfg.target_radii = cfg_int_list(val, line, key);
      else
        cfg_fail(line, "unknown key '" + key + "' in section [t_sweep]");
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline std::string write_config(const ExperimentConfig& cfg) {
  using detail::cfg_join;
  using detail::cfg_num;
  std::string o;
  o += "kind = " + std::string(kind_name(cfg.kind)) + "\n";
  o += "d = " + std::to_string(cfg.fri.d) + "\n";
  o += "u = " + cfg_num(cfg.fri.u) + "\n";
  o += "T = " + cfg_num(cfg.fri.T) + "\n";
  o += "N = " + std::to_string(cfg.window_radius) + "\n";
  o += "replicas = " + std::to_string(cfg.replicas) + "\n";
  o += "margin = " + std::to_string(cfg.margin) + "\n";
  o += "margin_epsilon = " + cfg_num(cfg.margin_epsilon) + "\n";
  o += "seed = " + std::to_string(cfg.seed) + "\n";
  o += "threads = " + std::to_string(cfg.threads) + "\n";
  o += "significance = " + cfg_num(cfg.significance) + "\n";
  o += "max_expected_steps = " + cfg_num(cfg.max_expected_steps) + "\n";
  o += "\n[chemdist]\n";
  o += "targets = " + cfg_join(cfg.target_radii) + "\n";
  o += "\n[shape]\n";
  o += "n_grid = " + cfg_join(cfg.n_grid) + "\n";
  o += "grid = " + std::to_string(cfg.shape_grid) + "\n";
  o += "\n[uniqueness]\n";
  o += "r_grid = " + cfg_join(cfg.r_grid) + "\n";
  o += "\n[crossing]\n";
  o += "grid = " + cfg_join(cfg.cross_grid) + "\n";
  o += "axis = " + std::to_string(cfg.crossing_axis) + "\n";
  o += "\n[qip]\n";
  o += "horizon = " + std::to_string(cfg.walk_horizon) + "\n";
  o += "walks = " + std::to_string(cfg.walks_per_replica) + "\n";
  o += std::string("all_occupied = ") +
       (cfg.qip_all_occupied ? "true" : "false") + "\n";
  o += "\n[validate]\n";
  o += "k_radius = " + std::to_string(cfg.k_radius) + "\n";
  o += "site_law_radius = " + std::to_string(cfg.site_law_radius) + "\n";
  o += "thin_replicas = " + std::to_string(cfg.thin_replicas) + "\n";
  o += "thin_window = " + std::to_string(cfg.thin_window) + "\n";
  o += "lucky_replicas = " + std::to_string(cfg.lucky_replicas) + "\n";
  o += "lucky_window = " + std::to_string(cfg.lucky_window) + "\n";
  o += "lucky_radii = " + cfg_join(cfg.lucky_radii) + "\n";
  o += "lucky_T = " + cfg_num(cfg.lucky_t) + "\n";
  o += "lucky_inner = " + cfg_num(cfg.lucky_inner) + "\n";
  o += "lucky_outer = " + cfg_num(cfg.lucky_outer) + "\n";
  o += "\n[t_sweep]\n";
  o += "T_grid = " + cfg_join(cfg.t_grid) + "\n";
  o += "targets = " + cfg_join(cfg.target_radii) + "\n";
  return o;
}

}  // namespace fri
