#pragma once
// Replicated experiment drivers.  Each experiment is a deterministic
// function of (config, master seed): per-replica rows are built in
// index-addressed slots regardless of the worker count, and aggregates are
// a pure function of (config, rows) so they can be recomputed from persisted
// rows and cross-checked byte-for-byte.
//
// Rows serialize as JSON objects (one line each); aggregates as one JSON
// document carrying a config echo plus a "checks" array of named pass/fail
// gates evaluated by the driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fri/cluster.hpp"
#include "fri/lattice.hpp"
#include "fri/parallel.hpp"
#include "fri/potential.hpp"
#include "fri/rng.hpp"
#include "fri/sampler.hpp"
#include "fri/stats.hpp"
#include "fri/walk.hpp"

namespace fri {

using json = nlohmann::ordered_json;

enum class ExperimentKind {
  chemdist,
  shape,
  uniqueness,
  crossing,
  qip,
  validate,
  t_sweep,
};

inline const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::chemdist: return "chemdist";
    case ExperimentKind::shape: return "shape";
    case ExperimentKind::uniqueness: return "uniqueness";
    case ExperimentKind::crossing: return "crossing";
    case ExperimentKind::qip: return "qip";
    case ExperimentKind::validate: return "validate";
    case ExperimentKind::t_sweep: return "t_sweep";
  }
  throw std::logic_error("kind_name: bad kind");
}

inline ExperimentKind kind_from_name(const std::string& s) {
  if (s == "chemdist") return ExperimentKind::chemdist;
  if (s == "shape") return ExperimentKind::shape;
  if (s == "uniqueness") return ExperimentKind::uniqueness;
  if (s == "crossing") return ExperimentKind::crossing;
  if (s == "qip") return ExperimentKind::qip;
  if (s == "validate") return ExperimentKind::validate;
  if (s == "t_sweep" || s == "tsweep") return ExperimentKind::t_sweep;
  throw std::invalid_argument("unknown experiment kind: " + s);
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::validate;
  FriParams fri{1.0, 100.0, 3};
  int32_t window_radius = 64;  // half side of the observation window B(N)
  int64_t replicas = 100;
  int margin = -1;  // explicit sampling margin when >= 0, else from epsilon
  double margin_epsilon = 1e-3;
  uint64_t seed = 1;
  int threads = 0;  // 0: FRI_LAB_THREADS env, then hardware
  double significance = 0.01;
  double max_expected_steps = 8e9;

  // chemdist / t_sweep: targets r * e_0 with r in target_radii
  std::vector<int32_t> target_radii{16, 32, 48, 64};
  // shape
  std::vector<int32_t> n_grid{16, 32, 64};  // chemical-ball radii (divisible chain)
  int32_t shape_grid = 40;  // mean-shape resolution: cells per unit length
  // uniqueness
  std::vector<int32_t> r_grid{8, 16, 32};
  // crossing
  std::vector<int32_t> cross_grid{16, 32, 64};
  int crossing_axis = 0;  // 0-based
  // qip (replicas = environments)
  int64_t walk_horizon = 10000;
  int64_t walks_per_replica = 40;
  bool qip_all_occupied = false;  // walk on all occupied sites, not the giant
  // validate
  int32_t k_radius = 3;           // hit-count target K = B(k_radius)
  int32_t site_law_radius = 24;   // window for per-site law histograms
  int64_t thin_replicas = 200;
  int32_t thin_window = 32;
  int64_t lucky_replicas = 100;
  int32_t lucky_window = 16;
  std::vector<int32_t> lucky_radii{2, 4, 6};
  double lucky_t = 100.0;
  double lucky_inner = 2.5;  // annulus factors (in units of sqrt(T))
  double lucky_outer = 3.5;
  // t_sweep
  std::vector<double> t_grid{25.0, 50.0, 100.0, 200.0};

  void validate() const;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

inline bool operator==(const FriParams& a, const FriParams& b) {
  return a.u == b.u && a.T == b.T && a.d == b.d;
}

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("config: " + msg);
}

template <typename T>
inline void require_sorted_grid(const std::vector<T>& g, const char* name) {
  require(!g.empty(), std::string(name) + " must be nonempty");
  for (size_t i = 1; i < g.size(); ++i)
    require(g[i] > g[i - 1],
            std::string(name) + " must be strictly increasing");
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  fri.validate();
  detail::require(window_radius >= 1, "window radius must be >= 1");
  detail::require(replicas >= 1, "replicas must be >= 1");
  detail::require(margin >= -1, "margin must be -1 (auto) or >= 0");
  detail::require(margin_epsilon > 0.0 && margin_epsilon < 0.5,
                  "margin_epsilon must be in (0, 0.5)");
  detail::require(threads >= 0, "threads must be >= 0");
  detail::require(significance > 0.0 && significance <= 0.5,
                  "significance must be in (0, 0.5]");
  detail::require(max_expected_steps >= 1e6,
                  "max_expected_steps must be >= 1e6");
  switch (kind) {
    case ExperimentKind::chemdist:
      detail::require_sorted_grid(target_radii, "target_radii");
      detail::require(target_radii.front() >= 0, "target radii must be >= 0");
      detail::require(target_radii.back() <= window_radius,
                      "target radii must be <= window radius");
      break;
    case ExperimentKind::shape: {
      detail::require_sorted_grid(n_grid, "n_grid");
      detail::require(n_grid.front() >= 1, "n_grid must be >= 1");
      detail::require(n_grid.back() <= window_radius,
                      "n_grid must be <= window radius");
      for (size_t i = 1; i < n_grid.size(); ++i)
        detail::require(n_grid[i] % n_grid[i - 1] == 0,
                        "each n_grid entry must divide the next");
      detail::require(shape_grid >= 4, "shape_grid must be >= 4");
      double cells = 1.0;
      for (int i = 0; i < fri.d; ++i) cells *= 2.0 * shape_grid + 1.0;
      detail::require(cells <= 8.4e6, "shape_grid too fine for dimension");
      break;
    }
    case ExperimentKind::uniqueness:
      detail::require_sorted_grid(r_grid, "r_grid");
      detail::require(r_grid.front() >= 1, "r_grid must be >= 1");
      detail::require(2 * r_grid.back() <= window_radius,
                      "window radius must be >= 2 * max(r_grid)");
      break;
    case ExperimentKind::crossing:
      detail::require_sorted_grid(cross_grid, "cross_grid");
      detail::require(cross_grid.front() >= 1, "cross_grid must be >= 1");
      detail::require(cross_grid.back() <= window_radius,
                      "cross_grid must be <= window radius");
      detail::require(crossing_axis >= 0 && crossing_axis < fri.d,
                      "crossing_axis out of range");
      break;
    case ExperimentKind::qip:
      detail::require(walk_horizon >= 2, "walk_horizon must be >= 2");
      detail::require(walks_per_replica >= 1,
                      "walks_per_replica must be >= 1");
      break;
    case ExperimentKind::validate:
      detail::require(k_radius >= 0, "k_radius must be >= 0");
      detail::require(site_law_radius >= 2, "site_law_radius must be >= 2");
      detail::require(thin_replicas >= 2, "thin_replicas must be >= 2");
      detail::require(thin_window >= 2, "thin_window must be >= 2");
      detail::require(lucky_replicas >= 1, "lucky_replicas must be >= 1");
      detail::require(lucky_window >= 1, "lucky_window must be >= 1");
      detail::require_sorted_grid(lucky_radii, "lucky_radii");
      detail::require(lucky_radii.front() >= 0, "lucky radii must be >= 0");
      detail::require(lucky_t > 1.0, "lucky_t must be > 1");
      detail::require(
          lucky_radii.back() <=
              static_cast<int32_t>(std::floor(1.5 * std::sqrt(lucky_t))),
          "lucky radii must fit inside B(1.5 sqrt(lucky_t))");
      detail::require(lucky_inner > 0.0 && lucky_outer > lucky_inner,
                      "lucky annulus factors must satisfy 0 < inner < outer");
      break;
    case ExperimentKind::t_sweep:
      detail::require_sorted_grid(t_grid, "t_grid");
      detail::require(t_grid.front() >= 1.0, "t_grid must be >= 1");
      detail::require(!target_radii.empty() &&
                          target_radii.back() <= window_radius,
                      "target radii must be <= window radius");
      break;
  }
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = kind_name(c.kind);
  j["d"] = c.fri.d;
  j["u"] = c.fri.u;
  j["T"] = c.fri.T;
  j["window_radius"] = c.window_radius;
  j["replicas"] = c.replicas;
  j["margin"] = c.margin;
  j["margin_epsilon"] = c.margin_epsilon;
  j["seed"] = c.seed;
  j["significance"] = c.significance;
  j["max_expected_steps"] = c.max_expected_steps;
  j["target_radii"] = c.target_radii;
  j["n_grid"] = c.n_grid;
  j["shape_grid"] = c.shape_grid;
  j["r_grid"] = c.r_grid;
  j["cross_grid"] = c.cross_grid;
  j["crossing_axis"] = c.crossing_axis;
  j["walk_horizon"] = c.walk_horizon;
  j["walks_per_replica"] = c.walks_per_replica;
  j["qip_all_occupied"] = c.qip_all_occupied;
  j["k_radius"] = c.k_radius;
  j["site_law_radius"] = c.site_law_radius;
  j["thin_replicas"] = c.thin_replicas;
  j["thin_window"] = c.thin_window;
  j["lucky_replicas"] = c.lucky_replicas;
  j["lucky_window"] = c.lucky_window;
  j["lucky_radii"] = c.lucky_radii;
  j["lucky_t"] = c.lucky_t;
  j["lucky_inner"] = c.lucky_inner;
  j["lucky_outer"] = c.lucky_outer;
  j["t_grid"] = c.t_grid;
  return j;
}

// Resolved sampling margin for a window of the given radius.
inline int resolved_margin(const ExperimentConfig& cfg, const FriParams& p,
                           int32_t window_radius) {
  if (cfg.margin >= 0) return cfg.margin;
  return recommended_margin(p, window_radius, cfg.margin_epsilon);
}

struct ExperimentResult {
  std::vector<std::string> rows;  // serialized JSON, one object per line
  json aggregates;
  std::vector<std::string> failed_checks;
};

// ---------------------------------------------------------------------------
// Helpers shared with the acceptance and unit tests.

namespace detail {

// Records, per start site, how many trajectories were rooted there and the
// length of every trajectory.  Walks are skipped exactly (begin -> false),
// so the scan costs O(trajectories), not O(steps).
struct SiteLawVisitor {
  std::vector<int64_t>* count_hist;
  std::vector<int64_t>* length_hist;
  int64_t trajectories = 0;
  int64_t sites_seen = 0;
  bool has_site = false;
  int64_t current_site = 0;
  int64_t current_count = 0;

  static void bump(std::vector<int64_t>& h, int64_t k) {
    if (k >= static_cast<int64_t>(h.size()))
      h.resize(static_cast<size_t>(k) + 1, 0);
    ++h[static_cast<size_t>(k)];
  }
  void flush() {
    if (has_site) {
      bump(*count_hist, current_count);
      ++sites_seen;
    }
  }
  bool begin(const Site&, int64_t site_key, int64_t, int64_t len) {
    if (!has_site || site_key != current_site) {
      flush();
      has_site = true;
      current_site = site_key;
      current_count = 0;
    }
    ++current_count;
    ++trajectories;
    bump(*length_hist, len);
    return false;
  }
  void step(int, int) {}
  void end() {}
};

// Counts trajectories whose range meets K.  Trajectories rooted inside K
// count immediately and their walk is skipped.
struct HitCountVisitor {
  int d = 3;
  Box k{};
  int64_t hits = 0;
  Site pos{};
  bool hit = false;

  bool begin(const Site& start, int64_t, int64_t, int64_t) {
    if (box_contains(k, start, d)) {
      ++hits;
      return false;
    }
    pos = start;
    hit = false;
    return true;
  }
  void step(int axis, int delta) {
    if (hit) return;
    pos[axis] += delta;
    if (box_contains(k, pos, d)) hit = true;
  }
  void end() {
    if (hit) ++hits;
  }
};

}  // namespace detail

struct SiteLawHistograms {
  int64_t sites = 0;
  int64_t trajectories = 0;
  std::vector<int64_t> count_hist;   // count_hist[k]: sites with k trajectories
  std::vector<int64_t> length_hist;  // length_hist[l]: trajectories of length l
};

// One pass over B(window_radius) with margin 0: per-site trajectory counts
// and the pooled trajectory-length histogram.
inline SiteLawHistograms site_law_histograms(const FriParams& p,
                                             int32_t window_radius,
                                             uint64_t seed,
                                             const ScanLimits& limits = {}) {
  const Box window{Site{}, window_radius};
  SiteLawHistograms out;
  out.count_hist.assign(1, 0);
  out.length_hist.assign(1, 0);
  detail::SiteLawVisitor v{&out.count_hist, &out.length_hist};
  scan_trajectories(p, window, 0, seed, v, limits);
  v.flush();
  out.sites = box_volume(window, p.d);
  out.trajectories = v.trajectories;
  out.count_hist[0] += out.sites - v.sites_seen;
  return out;
}

// Number of trajectories hitting K = B(k_radius) in one sampled window
// (window = K, padded by `margin`).
inline int64_t hit_count_one(const FriParams& p, int32_t k_radius, int margin,
                             uint64_t seed, const ScanLimits& limits = {}) {
  const Box k{Site{}, k_radius};
  detail::HitCountVisitor v;
  v.d = p.d;
  v.k = k;
  scan_trajectories(p, k, margin, seed, v, limits);
  return v.hits;
}

struct ThinComparison {
  int64_t grid_cells = 0;
  int64_t direct_bonds = 0;
  int64_t direct_giant = 0;
  int64_t union_bonds = 0;
  int64_t union_giant = 0;
};

// One replica of the split-and-merge comparison: a direct sample at
// intensity u against the union of `parts` fresh samples at u/parts each.
inline ThinComparison thin_compare_replica(const FriParams& p,
                                           int32_t window_radius, int margin,
                                           int parts, uint64_t seed,
                                           const ScanLimits& limits = {}) {
  if (parts < 2) throw std::invalid_argument("thin compare: parts < 2");
  const Box window{Site{}, window_radius};
  const FriSample parent = sample_window(p, window, margin, seed, limits);
  const BondConfig direct = build_bonds(parent);
  const std::vector<double> w(static_cast<size_t>(parts),
                              1.0 / static_cast<double>(parts));
  const std::vector<FriSample> sub = thin(parent, w, limits);
  const BondConfig merged = build_bonds_union(sub);
  ThinComparison out;
  out.grid_cells = direct.grid().size;
  out.direct_bonds = direct.bond_count();
  out.union_bonds = merged.bond_count();
  out.direct_giant = scan_components(direct, window.center).max_size;
  out.union_giant = scan_components(merged, window.center).max_size;
  return out;
}

// ---------------------------------------------------------------------------
// Bit-mask <-> hex string (for persisting per-replica shape masks in rows).

namespace detail {

inline std::string mask_to_hex(const std::vector<uint8_t>& mask) {
  static const char* digits = "0123456789abcdef";
  const size_t nbytes = (mask.size() + 7) / 8;
  std::vector<uint8_t> bytes(nbytes, 0);
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) bytes[i / 8] = static_cast<uint8_t>(bytes[i / 8] | (1u << (i % 8)));
  std::string out(2 * nbytes, '0');
  for (size_t b = 0; b < nbytes; ++b) {
    out[2 * b] = digits[bytes[b] >> 4];
    out[2 * b + 1] = digits[bytes[b] & 0xF];
  }
  return out;
}

inline std::vector<uint8_t> mask_from_hex(const std::string& hex,
                                          int64_t cells) {
  std::vector<uint8_t> mask(static_cast<size_t>(cells), 0);
  const auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw std::invalid_argument("mask_from_hex: bad digit");
  };
  for (int64_t i = 0; i < cells; ++i) {
    const size_t byte = static_cast<size_t>(i) / 8;
    if (2 * byte + 1 >= hex.size()) break;
    const int val = (nibble(hex[2 * byte]) << 4) | nibble(hex[2 * byte + 1]);
    if (val & (1 << (i % 8))) mask[static_cast<size_t>(i)] = 1;
  }
  return mask;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Row builders (one JSON object per replica, slot-addressed).

namespace detail {

inline std::vector<json> rows_chemdist(const ExperimentConfig& cfg) {
  const Box window{Site{}, cfg.window_radius};
  const int margin = resolved_margin(cfg, cfg.fri, cfg.window_radius);
  const ScanLimits limits{cfg.max_expected_steps};
  std::vector<json> rows(static_cast<size_t>(cfg.replicas));
  for_each_replica(cfg.replicas, cfg.threads, [&](int64_t rep) {
    const uint64_t seed =
        rng::derive(cfg.seed, rng::tag_replica, static_cast<uint64_t>(rep));
    const BondConfig bc = sample_bonds(cfg.fri, window, margin, seed, limits);
    const ComponentScan cs = scan_components(bc, window.center);
    json targets = json::array();
    for (int32_t r : cfg.target_radii) {
      Site y = window.center;
      y[0] += r;
      const int64_t dist = chemical_distance(bc, window.center, y);
      json t;
      t["r"] = r;
      t["connected"] = dist >= 0;
      t["dist"] = dist;
      targets.push_back(std::move(t));
    }
    json row;
    row["replica"] = rep;
    row["seed"] = seed;
    row["origin_giant"] = cs.origin_is_giant;
    row["targets"] = std::move(targets);
    rows[static_cast<size_t>(rep)] = std::move(row);
  });
  return rows;
}

inline std::vector<json> rows_shape(const ExperimentConfig& cfg) {
  const Box window{Site{}, cfg.window_radius};
  const int margin = resolved_margin(cfg, cfg.fri, cfg.window_radius);
  const ScanLimits limits{cfg.max_expected_steps};
  const int d = cfg.fri.d;
  const int32_t n_max = cfg.n_grid.back();
  const int32_t grid_r = cfg.shape_grid;
  std::vector<json> rows(static_cast<size_t>(cfg.replicas));
  for_each_replica(cfg.replicas, cfg.threads, [&](int64_t rep) {
    const uint64_t seed =
        rng::derive(cfg.seed, rng::tag_replica, static_cast<uint64_t>(rep));
    const BondConfig bc = sample_bonds(cfg.fri, window, margin, seed, limits);
    const ComponentScan cs = scan_components(bc, window.center);
    json row;
    row["replica"] = rep;
    row["seed"] = seed;
    row["origin_giant"] = cs.origin_is_giant;
    if (!cs.origin_is_giant) {
      rows[static_cast<size_t>(rep)] = std::move(row);
      return;
    }
    std::vector<ChemicalBall> balls;
    balls.reserve(cfg.n_grid.size());
    json counts = json::array();
    for (int32_t n : cfg.n_grid) {
      balls.push_back(chemical_ball_mask(bc, window.center, n));
      counts.push_back(balls.back().count);
    }
    // Successive rescaled Hausdorff steps: the pair (n_i, n_{i+1}) embeds on
    // the 1/n_{i+1} lattice (n_i divides n_{i+1}).
    json steps = json::array();
    for (size_t i = 0; i + 1 < cfg.n_grid.size(); ++i) {
      const int32_t na = cfg.n_grid[i], nb = cfg.n_grid[i + 1];
      const int32_t scale = nb / na;
      const BoxIndexer g(Box{Site{}, nb}, d);
      std::vector<uint8_t> a(static_cast<size_t>(g.size), 0);
      std::vector<uint8_t> b(static_cast<size_t>(g.size), 0);
      for (int64_t idx = 0; idx < balls[i].region.size; ++idx) {
        if (!balls[i].mask[static_cast<size_t>(idx)]) continue;
        Site s = balls[i].region.site(idx);
        for (int ax = 0; ax < d; ++ax) s[ax] *= scale;
        a[static_cast<size_t>(g.index(s))] = 1;
      }
      for (int64_t idx = 0; idx < balls[i + 1].region.size; ++idx) {
        if (!balls[i + 1].mask[static_cast<size_t>(idx)]) continue;
        const Site s = balls[i + 1].region.site(idx);
        b[static_cast<size_t>(g.index(s))] = 1;
      }
      const int h = stats::hausdorff_grid(a, b, g);
      steps.push_back(static_cast<double>(h) / static_cast<double>(nb));
    }
    json decreased = json::array();
    for (size_t i = 0; i + 1 < steps.size(); ++i)
      decreased.push_back(steps[i + 1].get<double>() <
                          steps[i].get<double>());
    // Coarse rescaled mask of the largest ball for the mean-shape estimate.
    const BoxIndexer cg(Box{Site{}, grid_r}, d);
    std::vector<uint8_t> coarse(static_cast<size_t>(cg.size), 0);
    const ChemicalBall& top = balls.back();
    for (int64_t idx = 0; idx < top.region.size; ++idx) {
      if (!top.mask[static_cast<size_t>(idx)]) continue;
      const Site s = top.region.site(idx);
      Site c{};
      for (int ax = 0; ax < d; ++ax)
        c[ax] = static_cast<int32_t>(std::llround(
            static_cast<double>(grid_r) * static_cast<double>(s[ax]) /
            static_cast<double>(n_max)));
      coarse[static_cast<size_t>(cg.index(c))] = 1;
    }
    row["counts"] = std::move(counts);
    row["steps"] = std::move(steps);
    row["decreased"] = std::move(decreased);
    row["mask_grid"] = grid_r;
    row["mask"] = mask_to_hex(coarse);
    rows[static_cast<size_t>(rep)] = std::move(row);
  });
  return rows;
}

inline std::vector<json> rows_uniqueness(const ExperimentConfig& cfg) {
  const Box window{Site{}, cfg.window_radius};
  const int margin = resolved_margin(cfg, cfg.fri, cfg.window_radius);
  const ScanLimits limits{cfg.max_expected_steps};
  std::vector<json> rows(static_cast<size_t>(cfg.replicas));
  for_each_replica(cfg.replicas, cfg.threads, [&](int64_t rep) {
    const uint64_t seed =
        rng::derive(cfg.seed, rng::tag_replica, static_cast<uint64_t>(rep));
    const BondConfig bc = sample_bonds(cfg.fri, window, margin, seed, limits);
    json violated = json::array();
    for (int32_t r : cfg.r_grid)
      violated.push_back(local_uniqueness_violated(bc, r));
    json row;
    row["replica"] = rep;
    row["seed"] = seed;
    row["violated"] = std::move(violated);
    rows[static_cast<size_t>(rep)] = std::move(row);
  });
  return rows;
}

inline std::vector<json> rows_crossing(const ExperimentConfig& cfg) {
  const Box window{Site{}, cfg.window_radius};
  const int margin = resolved_margin(cfg, cfg.fri, cfg.window_radius);
  const ScanLimits limits{cfg.max_expected_steps};
  std::vector<json> rows(static_cast<size_t>(cfg.replicas));
  for_each_replica(cfg.replicas, cfg.threads, [&](int64_t rep) {
    const uint64_t seed =
        rng::derive(cfg.seed, rng::tag_replica, static_cast<uint64_t>(rep));
    const BondConfig bc = sample_bonds(cfg.fri, window, margin, seed, limits);
    json crossed = json::array();
    for (int32_t n : cfg.cross_grid)
      crossed.push_back(
          crossing_exists(bc, Box{window.center, n}, cfg.crossing_axis));
    json row;
    row["replica"] = rep;
    row["seed"] = seed;
    row["crossed"] = std::move(crossed);
    rows[static_cast<size_t>(rep)] = std::move(row);
  });
  return rows;
}

inline std::vector<json> rows_qip(const ExperimentConfig& cfg) {
  const Box window{Site{}, cfg.window_radius};
  const int margin = resolved_margin(cfg, cfg.fri, cfg.window_radius);
  const ScanLimits limits{cfg.max_expected_steps};
  const int d = cfg.fri.d;
  constexpr int kMaxAttempts = 256;
  std::vector<json> rows(static_cast<size_t>(cfg.replicas));
  for_each_replica(cfg.replicas, cfg.threads, [&](int64_t rep) {
    const uint64_t env_seed =
        rng::derive(cfg.seed, rng::tag_replica, static_cast<uint64_t>(rep));
    int attempts = 0;
    BondConfig bc;
    ComponentScan cs;
    for (;;) {
      if (attempts >= kMaxAttempts)
        throw std::runtime_error(
            "qip: origin not in a giant cluster after " +
            std::to_string(kMaxAttempts) +
            " samples; parameters look subcritical");
      const uint64_t sample_seed =
          rng::derive(env_seed, static_cast<uint64_t>(attempts));
      ++attempts;
      bc = sample_bonds(cfg.fri, window, margin, sample_seed, limits);
      if (!bc.occupied(window.center)) continue;
      cs = scan_components(bc, window.center, /*keep_origin_mask=*/true);
      if (cs.origin_is_giant) break;
    }
    const BoxIndexer& g = bc.grid();
    const auto in_set = [&](const Site& z) {
      if (cfg.qip_all_occupied) return bc.occupied(z);
      return cs.origin_mask.get(g.index(z));
    };
    const int64_t mid_horizon = cfg.walk_horizon / 2;
    json walks = json::array();
    for (int64_t w = 0; w < cfg.walks_per_replica; ++w) {
      rng::Stream gs(rng::derive(env_seed, rng::tag_cluster_walk,
                                 static_cast<uint64_t>(w)));
      Site cur = window.center;
      bool discarded = false;
      Site mid = window.center;
      for (int64_t step = 1; step <= cfg.walk_horizon; ++step) {
        cur = lazy_cluster_step(cur, d, in_set, gs);
        if (linf_distance(cur, window.center, d) >= cfg.window_radius) {
          discarded = true;
          break;
        }
        if (step == mid_horizon) mid = cur;
      }
      json entry;
      json mid_j = json::array(), fin_j = json::array();
      for (int ax = 0; ax < d; ++ax) {
        mid_j.push_back(mid[ax] - window.center[ax]);
        fin_j.push_back(cur[ax] - window.center[ax]);
      }
      entry["discarded"] = discarded;
      entry["mid"] = std::move(mid_j);
      entry["final"] = std::move(fin_j);
      walks.push_back(std::move(entry));
    }
    json row;
    row["replica"] = rep;
    row["seed"] = env_seed;
    row["attempts"] = attempts;
    row["giant_size"] = cs.origin_size;
    row["walks"] = std::move(walks);
    rows[static_cast<size_t>(rep)] = std::move(row);
  });
  return rows;
}

inline std::vector<json> rows_validate(const ExperimentConfig& cfg) {
  const ScanLimits limits{cfg.max_expected_steps};
  std::vector<json> rows;

  // Part 1: hit counts of K = B(k_radius), one window per replica.
  {
    const uint64_t part_seed = rng::derive(cfg.seed, rng::tag_replica, 1);
    const int margin = resolved_margin(cfg, cfg.fri, cfg.k_radius);
    std::vector<json> part(static_cast<size_t>(cfg.replicas));
    for_each_replica(cfg.replicas, cfg.threads, [&](int64_t rep) {
      const uint64_t seed =
          rng::derive(part_seed, rng::tag_replica, static_cast<uint64_t>(rep));
      json row;
      row["part"] = "hit_count";
      row["replica"] = rep;
      row["seed"] = seed;
      row["count"] = hit_count_one(cfg.fri, cfg.k_radius, margin, seed, limits);
      part[static_cast<size_t>(rep)] = std::move(row);
    });
    for (auto& r : part) rows.push_back(std::move(r));
  }

  // Part 2: per-site count and trajectory-length histograms (single pass).
  {
    const uint64_t part_seed = rng::derive(cfg.seed, rng::tag_replica, 2);
    const SiteLawHistograms h =
        site_law_histograms(cfg.fri, cfg.site_law_radius, part_seed, limits);
    json row;
    row["part"] = "site_law";
    row["replica"] = 0;
    row["seed"] = part_seed;
    row["sites"] = h.sites;
    row["trajectories"] = h.trajectories;
    row["count_hist"] = h.count_hist;
    row["length_hist"] = h.length_hist;
    rows.push_back(std::move(row));
  }

  // Part 3: split-and-merge comparison.
  {
    const uint64_t part_seed = rng::derive(cfg.seed, rng::tag_replica, 3);
    const int margin = resolved_margin(cfg, cfg.fri, cfg.thin_window);
    std::vector<json> part(static_cast<size_t>(cfg.thin_replicas));
    for_each_replica(cfg.thin_replicas, cfg.threads, [&](int64_t rep) {
      const uint64_t seed =
          rng::derive(part_seed, rng::tag_replica, static_cast<uint64_t>(rep));
      const ThinComparison t = thin_compare_replica(
          cfg.fri, cfg.thin_window, margin, 3, seed, limits);
      json row;
      row["part"] = "thin";
      row["replica"] = rep;
      row["seed"] = seed;
      row["grid_cells"] = t.grid_cells;
      row["direct_bonds"] = t.direct_bonds;
      row["direct_giant"] = t.direct_giant;
      row["union_bonds"] = t.union_bonds;
      row["union_giant"] = t.union_giant;
      part[static_cast<size_t>(rep)] = std::move(row);
    });
    for (auto& r : part) rows.push_back(std::move(r));
  }

  // Part 4: trajectories surviving >= T steps past their first hit of A,
  // counted from annulus-rooted starts, for a grid of target radii.
  {
    const uint64_t part_seed = rng::derive(cfg.seed, rng::tag_replica, 4);
    FriParams lp = cfg.fri;
    lp.T = cfg.lucky_t;
    const int margin = resolved_margin(cfg, lp, cfg.lucky_window);
    const Box window{Site{}, cfg.lucky_window};
    std::vector<json> part(static_cast<size_t>(cfg.lucky_replicas));
    for_each_replica(cfg.lucky_replicas, cfg.threads, [&](int64_t rep) {
      const uint64_t seed =
          rng::derive(part_seed, rng::tag_replica, static_cast<uint64_t>(rep));
      const FriSample s = sample_window(lp, window, margin, seed, limits);
      json counts = json::array();
      for (int32_t r : cfg.lucky_radii)
        counts.push_back(lucky_path_count(s, window.center,
                                          Box{window.center, r},
                                          cfg.lucky_inner, cfg.lucky_outer));
      json row;
      row["part"] = "lucky";
      row["replica"] = rep;
      row["seed"] = seed;
      row["counts"] = std::move(counts);
      part[static_cast<size_t>(rep)] = std::move(row);
    });
    for (auto& r : part) rows.push_back(std::move(r));
  }

  return rows;
}

inline std::vector<json> rows_t_sweep(const ExperimentConfig& cfg) {
  const Box window{Site{}, cfg.window_radius};
  const ScanLimits limits{cfg.max_expected_steps};
  std::vector<json> rows;
  for (size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
    FriParams p = cfg.fri;
    p.T = cfg.t_grid[ti];
    const int margin = resolved_margin(cfg, p, cfg.window_radius);
    std::vector<json> part(static_cast<size_t>(cfg.replicas));
    for_each_replica(cfg.replicas, cfg.threads, [&](int64_t rep) {
      const uint64_t seed = rng::derive(cfg.seed, rng::tag_replica,
                                        static_cast<uint64_t>(ti),
                                        static_cast<uint64_t>(rep));
      const BondConfig bc = sample_bonds(p, window, margin, seed, limits);
      const ComponentScan cs = scan_components(bc, window.center);
      json targets = json::array();
      for (int32_t r : cfg.target_radii) {
        Site y = window.center;
        y[0] += r;
        const int64_t dist = chemical_distance(bc, window.center, y);
        json t;
        t["r"] = r;
        t["connected"] = dist >= 0;
        t["dist"] = dist;
        targets.push_back(std::move(t));
      }
      json row;
      row["part"] = "T" + std::to_string(ti);
      row["T"] = p.T;
      row["replica"] = rep;
      row["seed"] = seed;
      row["origin_giant"] = cs.origin_is_giant;
      row["targets"] = std::move(targets);
      part[static_cast<size_t>(rep)] = std::move(row);
    });
    for (auto& r : part) rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Aggregation: a pure function of (config, rows).

namespace detail {

inline json check_entry(const std::string& name, bool pass,
                        const std::string& note) {
  json c;
  c["name"] = name;
  c["pass"] = pass;
  c["note"] = note;
  return c;
}

inline json summary_json(const std::vector<double>& xs) {
  json j;
  if (xs.empty()) {
    j["n"] = 0;
    return j;
  }
  const stats::SummaryStats s = stats::summarize(xs);
  j["n"] = s.n;
  j["mean"] = s.mean;
  j["stderr"] = s.stderr_mean();
  j["min"] = s.min;
  j["max"] = s.max;
  return j;
}

inline json aggregate_chemdist_like([[maybe_unused]] const ExperimentConfig& cfg,
                                    const std::vector<json>& rows,
                                    double significance) {
  json out;
  int64_t giant = 0;
  for (const json& r : rows)
    if (r.at("origin_giant").get<bool>()) ++giant;
  out["replicas"] = static_cast<int64_t>(rows.size());
  out["giant_fraction"] =
      rows.empty() ? 0.0
                   : static_cast<double>(giant) /
                         static_cast<double>(rows.size());
  json targets = json::array();
  std::vector<double> fit_x, fit_y;
  double ratio_min = std::numeric_limits<double>::infinity();
  double ratio_max = -std::numeric_limits<double>::infinity();
  const size_t n_targets =
      rows.empty() ? 0 : rows.front().at("targets").size();
  for (size_t j = 0; j < n_targets; ++j) {
    const int32_t r_val = rows.front()["targets"][j]["r"].get<int32_t>();
    std::vector<double> dists, ratios;
    for (const json& row : rows) {
      if (!row.at("origin_giant").get<bool>()) continue;
      const json& t = row["targets"][j];
      if (!t.at("connected").get<bool>()) continue;
      const double dv = static_cast<double>(t.at("dist").get<int64_t>());
      dists.push_back(dv);
      ratios.push_back(r_val > 0 ? dv / static_cast<double>(r_val) : 0.0);
    }
    json tj;
    tj["r"] = r_val;
    tj["n_conditioned"] = static_cast<int64_t>(dists.size());
    tj["fraction_conditioned"] =
        rows.empty() ? 0.0
                     : static_cast<double>(dists.size()) /
                           static_cast<double>(rows.size());
    tj["dist"] = summary_json(dists);
    tj["ratio"] = summary_json(ratios);
    if (!ratios.empty()) {
      tj["ratio_p99"] = stats::quantile(ratios, 0.99);
      const double m = stats::summarize(ratios).mean;
      if (r_val > 0) {
        ratio_min = std::min(ratio_min, m);
        ratio_max = std::max(ratio_max, m);
        fit_x.push_back(static_cast<double>(r_val));
        fit_y.push_back(stats::summarize(dists).mean);
      }
    } else {
      tj["ratio_p99"] = nullptr;
    }
    targets.push_back(std::move(tj));
  }
  out["targets"] = std::move(targets);
  if (std::isfinite(ratio_min) && ratio_min > 0.0)
    out["ratio_spread"] = (ratio_max - ratio_min) / ratio_min;
  else
    out["ratio_spread"] = nullptr;
  if (fit_x.size() >= 3) {
    const stats::LinearFit f = stats::linear_fit(fit_x, fit_y);
    json fj;
    fj["slope"] = f.slope;
    fj["intercept"] = f.intercept;
    fj["r2"] = f.r2;
    fj["slope_stderr"] = f.slope_stderr;
    out["fit"] = std::move(fj);
  } else {
    out["fit"] = nullptr;
  }
  (void)significance;
  return out;
}

inline json aggregate_chemdist(const ExperimentConfig& cfg,
                               const std::vector<json>& rows) {
  json out = aggregate_chemdist_like(cfg, rows, cfg.significance);
  out["checks"] = json::array();
  return out;
}

inline json aggregate_shape(const ExperimentConfig& cfg,
                            const std::vector<json>& rows) {
  const int d = cfg.fri.d;
  json out;
  std::vector<const json*> valid;
  for (const json& r : rows)
    if (r.at("origin_giant").get<bool>()) valid.push_back(&r);
  const int64_t n_valid = static_cast<int64_t>(valid.size());
  out["replicas"] = static_cast<int64_t>(rows.size());
  out["n_valid"] = n_valid;
  const double valid_fraction =
      rows.empty() ? 0.0
                   : static_cast<double>(n_valid) /
                         static_cast<double>(rows.size());
  out["valid_fraction"] = valid_fraction;

  // Ball sizes and successive Hausdorff steps.
  json counts = json::array();
  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    std::vector<double> xs;
    for (const json* r : valid)
      xs.push_back(
          static_cast<double>((*r)["counts"][i].get<int64_t>()));
    json cj;
    cj["n"] = cfg.n_grid[i];
    cj["count"] = summary_json(xs);
    counts.push_back(std::move(cj));
  }
  out["balls"] = std::move(counts);

  json steps = json::array();
  for (size_t i = 0; i + 1 < cfg.n_grid.size(); ++i) {
    std::vector<double> xs;
    for (const json* r : valid)
      xs.push_back((*r)["steps"][i].get<double>());
    json sj;
    sj["n_from"] = cfg.n_grid[i];
    sj["n_to"] = cfg.n_grid[i + 1];
    sj["step"] = summary_json(xs);
    steps.push_back(std::move(sj));
  }
  out["steps"] = std::move(steps);

  json dec = json::array();
  for (size_t i = 0; i + 2 < cfg.n_grid.size(); ++i) {
    int64_t k = 0;
    for (const json* r : valid)
      if ((*r)["decreased"][i].get<bool>()) ++k;
    json dj;
    dj["pair"] = static_cast<int64_t>(i);
    dj["decreased"] = k;
    dj["fraction"] = n_valid > 0 ? static_cast<double>(k) /
                                       static_cast<double>(n_valid)
                                 : 0.0;
    dec.push_back(std::move(dj));
  }
  out["decrease"] = std::move(dec);

  // Mean shape: majority-vote mask over the coarse rescaled grids.
  json ms;
  ms["grid"] = cfg.shape_grid;
  if (n_valid > 0) {
    const BoxIndexer cg(Box{Site{}, cfg.shape_grid}, d);
    std::vector<int64_t> freq(static_cast<size_t>(cg.size), 0);
    for (const json* r : valid) {
      const std::vector<uint8_t> m = mask_from_hex(
          (*r)["mask"].get<std::string>(), cg.size);
      for (int64_t i = 0; i < cg.size; ++i)
        freq[static_cast<size_t>(i)] += m[static_cast<size_t>(i)];
    }
    std::vector<uint8_t> mean_mask(static_cast<size_t>(cg.size), 0);
    std::vector<Site> cells;
    int64_t n_cells = 0;
    for (int64_t i = 0; i < cg.size; ++i)
      if (2 * freq[static_cast<size_t>(i)] >= n_valid) {
        mean_mask[static_cast<size_t>(i)] = 1;
        cells.push_back(cg.site(i));
        ++n_cells;
      }
    ms["cells"] = n_cells;
    if (n_cells > 0) {
      ms["symmetry_score"] = stats::symmetry_score_grid(mean_mask, cg);
      const double deficit = stats::convexity_deficit(cells, d);
      if (std::isnan(deficit))
        ms["convexity_deficit"] = nullptr;
      else
        ms["convexity_deficit"] = deficit;
    } else {
      ms["symmetry_score"] = nullptr;
      ms["convexity_deficit"] = nullptr;
    }
  } else {
    ms["cells"] = 0;
    ms["symmetry_score"] = nullptr;
    ms["convexity_deficit"] = nullptr;
  }
  out["mean_shape"] = std::move(ms);

  json checks = json::array();
  checks.push_back(check_entry(
      "shape_valid_fraction", valid_fraction >= 0.5,
      "fraction of replicas with the origin in the giant cluster = " +
          std::to_string(valid_fraction)));
  out["checks"] = std::move(checks);
  return out;
}

inline json aggregate_uniqueness(const ExperimentConfig& cfg,
                                 const std::vector<json>& rows) {
  json out;
  out["replicas"] = static_cast<int64_t>(rows.size());
  json per_r = json::array();
  std::vector<stats::Interval> ivs;
  for (size_t j = 0; j < cfg.r_grid.size(); ++j) {
    int64_t k = 0;
    for (const json& r : rows)
      if (r.at("violated")[j].get<bool>()) ++k;
    const stats::Interval iv =
        stats::wilson_interval(k, static_cast<int64_t>(rows.size()));
    ivs.push_back(iv);
    json rj;
    rj["R"] = cfg.r_grid[j];
    rj["violations"] = k;
    rj["frequency"] = static_cast<double>(k) /
                      static_cast<double>(rows.size());
    rj["wilson_lo"] = iv.lo;
    rj["wilson_hi"] = iv.hi;
    per_r.push_back(std::move(rj));
  }
  out["per_R"] = std::move(per_r);
  bool monotone = true;
  for (size_t j = 0; j + 1 < ivs.size(); ++j)
    monotone = monotone && ivs[j + 1].lo <= ivs[j].hi;
  json checks = json::array();
  checks.push_back(check_entry(
      "uniqueness_monotone", monotone,
      "violation frequency nonincreasing in R within Wilson CI overlap"));
  out["checks"] = std::move(checks);
  return out;
}

inline json aggregate_crossing(const ExperimentConfig& cfg,
                               const std::vector<json>& rows) {
  const int d = cfg.fri.d;
  json out;
  out["replicas"] = static_cast<int64_t>(rows.size());
  json per_n = json::array();
  std::vector<stats::Interval> ivs;
  std::vector<double> fit_x, fit_y;
  for (size_t j = 0; j < cfg.cross_grid.size(); ++j) {
    int64_t k = 0;
    for (const json& r : rows)
      if (r.at("crossed")[j].get<bool>()) ++k;
    const int64_t n = static_cast<int64_t>(rows.size());
    const stats::Interval iv = stats::wilson_interval(k, n);
    ivs.push_back(iv);
    const double freq = static_cast<double>(k) / static_cast<double>(n);
    json nj;
    nj["N"] = cfg.cross_grid[j];
    nj["crossings"] = k;
    nj["frequency"] = freq;
    nj["wilson_lo"] = iv.lo;
    nj["wilson_hi"] = iv.hi;
    per_n.push_back(std::move(nj));
    if (k > 0 && k < n) {
      fit_x.push_back(std::pow(static_cast<double>(cfg.cross_grid[j]),
                               static_cast<double>(d - 1)));
      fit_y.push_back(std::log(1.0 - freq));
    }
  }
  out["per_N"] = std::move(per_n);
  if (fit_x.size() >= 3) {
    const stats::LinearFit f = stats::linear_fit(fit_x, fit_y);
    json fj;
    fj["slope"] = f.slope;
    fj["intercept"] = f.intercept;
    fj["r2"] = f.r2;
    fj["slope_stderr"] = f.slope_stderr;
    out["failure_decay_fit"] = std::move(fj);
  } else {
    out["failure_decay_fit"] = nullptr;
  }
  bool monotone = true;
  for (size_t j = 0; j + 1 < ivs.size(); ++j)
    monotone = monotone && ivs[j + 1].hi >= ivs[j].lo;
  json checks = json::array();
  checks.push_back(check_entry(
      "crossing_monotone", monotone,
      "crossing frequency nondecreasing in N within Wilson CI overlap"));
  out["checks"] = std::move(checks);
  return out;
}

inline json aggregate_qip(const ExperimentConfig& cfg,
                          const std::vector<json>& rows) {
  const int d = cfg.fri.d;
  json out;
  out["replicas"] = static_cast<int64_t>(rows.size());
  out["walk_horizon"] = cfg.walk_horizon;
  out["mid_horizon"] = cfg.walk_horizon / 2;

  int64_t total_walks = 0, discarded = 0, attempts = 0;
  std::vector<std::array<double, kMaxDim>> finals, mids;
  for (const json& r : rows) {
    attempts += r.at("attempts").get<int64_t>();
    for (const json& w : r.at("walks")) {
      ++total_walks;
      if (w.at("discarded").get<bool>()) {
        ++discarded;
        continue;
      }
      std::array<double, kMaxDim> f{}, m{};
      for (int ax = 0; ax < d; ++ax) {
        f[static_cast<size_t>(ax)] =
            static_cast<double>(w.at("final")[static_cast<size_t>(ax)]
                                    .get<int64_t>());
        m[static_cast<size_t>(ax)] =
            static_cast<double>(w.at("mid")[static_cast<size_t>(ax)]
                                    .get<int64_t>());
      }
      finals.push_back(f);
      mids.push_back(m);
    }
  }
  const int64_t n = static_cast<int64_t>(finals.size());
  out["total_walks"] = total_walks;
  out["valid_walks"] = n;
  out["sample_attempts"] = attempts;
  const double discard_fraction =
      total_walks > 0
          ? static_cast<double>(discarded) / static_cast<double>(total_walks)
          : 0.0;
  out["discard_fraction"] = discard_fraction;

  json checks = json::array();
  if (n >= 2) {
    // Mean displacement per coordinate.
    json mean_j = json::array();
    for (int ax = 0; ax < d; ++ax) {
      std::vector<double> xs;
      xs.reserve(static_cast<size_t>(n));
      for (const auto& f : finals) xs.push_back(f[static_cast<size_t>(ax)]);
      mean_j.push_back(summary_json(xs));
    }
    out["final_mean"] = std::move(mean_j);

    // Covariance of X / sqrt(horizon).
    const double sn = std::sqrt(static_cast<double>(cfg.walk_horizon));
    std::vector<std::vector<double>> cov(
        static_cast<size_t>(d), std::vector<double>(static_cast<size_t>(d)));
    std::array<double, kMaxDim> mean{};
    for (const auto& f : finals)
      for (int ax = 0; ax < d; ++ax)
        mean[static_cast<size_t>(ax)] += f[static_cast<size_t>(ax)] / sn;
    for (int ax = 0; ax < d; ++ax)
      mean[static_cast<size_t>(ax)] /= static_cast<double>(n);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        double acc = 0.0;
        for (const auto& f : finals)
          acc += (f[static_cast<size_t>(a)] / sn - mean[static_cast<size_t>(a)]) *
                 (f[static_cast<size_t>(b)] / sn - mean[static_cast<size_t>(b)]);
        cov[static_cast<size_t>(a)][static_cast<size_t>(b)] =
            acc / static_cast<double>(n - 1);
      }
    json cov_j = json::array();
    for (int a = 0; a < d; ++a) {
      json rowj = json::array();
      for (int b = 0; b < d; ++b)
        rowj.push_back(cov[static_cast<size_t>(a)][static_cast<size_t>(b)]);
      cov_j.push_back(std::move(rowj));
    }
    out["cov"] = std::move(cov_j);
    // Normal-theory standard errors for covariance entries.
    json cov_se = json::array();
    for (int a = 0; a < d; ++a) {
      json rowj = json::array();
      for (int b = 0; b < d; ++b) {
        const double caa = cov[static_cast<size_t>(a)][static_cast<size_t>(a)];
        const double cbb = cov[static_cast<size_t>(b)][static_cast<size_t>(b)];
        const double cab = cov[static_cast<size_t>(a)][static_cast<size_t>(b)];
        rowj.push_back(
            std::sqrt((caa * cbb + cab * cab) / static_cast<double>(n - 1)));
      }
      cov_se.push_back(std::move(rowj));
    }
    out["cov_stderr"] = std::move(cov_se);

    // Diffusivity at the two horizons.
    double s_fin = 0.0, s_mid = 0.0;
    for (const auto& f : finals)
      for (int ax = 0; ax < d; ++ax)
        s_fin += f[static_cast<size_t>(ax)] * f[static_cast<size_t>(ax)];
    for (const auto& m : mids)
      for (int ax = 0; ax < d; ++ax)
        s_mid += m[static_cast<size_t>(ax)] * m[static_cast<size_t>(ax)];
    const double diff_fin = s_fin / static_cast<double>(n) /
                            static_cast<double>(cfg.walk_horizon);
    const double diff_mid = s_mid / static_cast<double>(n) /
                            static_cast<double>(cfg.walk_horizon / 2);
    out["diffusivity_final"] = diff_fin;
    out["diffusivity_mid"] = diff_mid;
    out["diffusivity_ratio"] = diff_fin > 0.0 ? diff_mid / diff_fin : 0.0;
  } else {
    out["final_mean"] = nullptr;
    out["cov"] = nullptr;
    out["cov_stderr"] = nullptr;
    out["diffusivity_final"] = nullptr;
    out["diffusivity_mid"] = nullptr;
    out["diffusivity_ratio"] = nullptr;
  }
  checks.push_back(check_entry(
      "qip_discard_fraction", discard_fraction < 0.05,
      "walks leaving the window = " + std::to_string(discard_fraction) +
          " (must stay < 0.05; enlarge the window otherwise)"));
  out["checks"] = std::move(checks);
  return out;
}

inline json aggregate_validate(const ExperimentConfig& cfg,
                               const std::vector<json>& rows) {
  json out;
  json checks = json::array();

  // Part 1: hit-count law.
  {
    std::vector<int64_t> hist(1, 0);
    int64_t n_windows = 0;
    for (const json& r : rows) {
      if (r.at("part").get<std::string>() != "hit_count") continue;
      ++n_windows;
      SiteLawVisitor::bump(hist, r.at("count").get<int64_t>());
    }
    const double s = cfg.fri.survival();
    const Equilibrium eq = equilibrium_solve(
        box_sites(Box{Site{}, cfg.k_radius}, cfg.fri.d), cfg.fri.d, s);
    const double lambda =
        2.0 * cfg.fri.d * cfg.fri.u * eq.capacity;
    json part;
    part["windows"] = n_windows;
    part["killed_capacity"] = eq.capacity;
    part["lambda"] = lambda;
    const stats::TestResult t =
        stats::poisson_gof(hist, lambda, cfg.significance);
    part["statistic"] = t.statistic;
    part["df"] = t.df;
    part["p_value"] = t.p_value;
    part["pass"] = !t.reject;
    out["hit_count"] = std::move(part);
    checks.push_back(check_entry("hit_count_gof", !t.reject,
                                 "p=" + std::to_string(t.p_value)));
  }

  // Part 2: per-site count law and length law.
  {
    const json* law = nullptr;
    for (const json& r : rows)
      if (r.at("part").get<std::string>() == "site_law") law = &r;
    if (law == nullptr)
      throw std::invalid_argument("validate rows: missing site_law row");
    const std::vector<int64_t> ch =
        law->at("count_hist").get<std::vector<int64_t>>();
    const std::vector<int64_t> lh =
        law->at("length_hist").get<std::vector<int64_t>>();
    const stats::TestResult tc =
        stats::poisson_gof(ch, cfg.fri.site_rate(), cfg.significance);
    const stats::TestResult tl = stats::geometric_gof(
        lh, 1.0 / (cfg.fri.T + 1.0), cfg.significance);
    json part;
    part["sites"] = law->at("sites").get<int64_t>();
    part["trajectories"] = law->at("trajectories").get<int64_t>();
    part["count_p_value"] = tc.p_value;
    part["count_pass"] = !tc.reject;
    part["length_p_value"] = tl.p_value;
    part["length_pass"] = !tl.reject;
    out["site_law"] = std::move(part);
    checks.push_back(check_entry("site_count_gof", !tc.reject,
                                 "p=" + std::to_string(tc.p_value)));
    checks.push_back(check_entry("length_gof", !tl.reject,
                                 "p=" + std::to_string(tl.p_value)));
  }

  // Part 3: split-and-merge two-sample comparison.
  {
    std::vector<double> dd, du, gd, gu;
    for (const json& r : rows) {
      if (r.at("part").get<std::string>() != "thin") continue;
      const double cells =
          static_cast<double>(r.at("grid_cells").get<int64_t>());
      dd.push_back(static_cast<double>(r.at("direct_bonds").get<int64_t>()) /
                   cells);
      du.push_back(static_cast<double>(r.at("union_bonds").get<int64_t>()) /
                   cells);
      gd.push_back(static_cast<double>(r.at("direct_giant").get<int64_t>()) /
                   cells);
      gu.push_back(static_cast<double>(r.at("union_giant").get<int64_t>()) /
                   cells);
    }
    const stats::TestResult td =
        stats::welch_t_test(dd, du, cfg.significance);
    const stats::TestResult tg =
        stats::welch_t_test(gd, gu, cfg.significance);
    json part;
    part["replicas"] = static_cast<int64_t>(dd.size());
    part["direct_density"] = summary_json(dd);
    part["union_density"] = summary_json(du);
    part["direct_giant"] = summary_json(gd);
    part["union_giant"] = summary_json(gu);
    part["density_p_value"] = td.p_value;
    part["density_pass"] = !td.reject;
    part["giant_p_value"] = tg.p_value;
    part["giant_pass"] = !tg.reject;
    out["thin"] = std::move(part);
    checks.push_back(check_entry("thin_density", !td.reject,
                                 "p=" + std::to_string(td.p_value)));
    checks.push_back(check_entry("thin_giant", !tg.reject,
                                 "p=" + std::to_string(tg.p_value)));
  }

  // Part 4: survivor-path counts against unkilled capacity.
  {
    std::vector<double> caps;
    for (int32_t r : cfg.lucky_radii)
      caps.push_back(ball_capacity(cfg.fri.d, r).capacity);
    std::vector<double> fx, fy;
    json per_radius = json::array();
    std::vector<std::vector<double>> counts(cfg.lucky_radii.size());
    for (const json& r : rows) {
      if (r.at("part").get<std::string>() != "lucky") continue;
      for (size_t j = 0; j < cfg.lucky_radii.size(); ++j) {
        const double c =
            static_cast<double>(r.at("counts")[j].get<int64_t>());
        counts[j].push_back(c);
        fx.push_back(caps[j]);
        fy.push_back(c);
      }
    }
    for (size_t j = 0; j < cfg.lucky_radii.size(); ++j) {
      json pj;
      pj["radius"] = cfg.lucky_radii[j];
      pj["capacity"] = caps[j];
      pj["count"] = summary_json(counts[j]);
      per_radius.push_back(std::move(pj));
    }
    json part;
    part["per_radius"] = std::move(per_radius);
    bool pass = false;
    bool spread = false;
    for (const double x : fx) spread = spread || x != fx.front();
    if (fx.size() >= 3 && spread) {
      const stats::LinearFit f = stats::linear_fit(fx, fy);
      part["slope"] = f.slope;
      part["slope_stderr"] = f.slope_stderr;
      const double p_one =
          f.slope > 0.0 ? 0.5 * f.slope_p : 1.0 - 0.5 * f.slope_p;
      part["slope_p_one_sided"] = p_one;
      pass = f.slope > 0.0 && p_one < cfg.significance;
    } else {
      part["slope"] = nullptr;
    }
    part["pass"] = pass;
    out["lucky"] = std::move(part);
    checks.push_back(check_entry("lucky_slope", pass,
                                 "count grows with target capacity"));
  }

  out["checks"] = std::move(checks);
  return out;
}

inline json aggregate_t_sweep(const ExperimentConfig& cfg,
                              const std::vector<json>& rows) {
  json out;
  json per_t = json::array();
  bool all_finite = true;
  for (size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
    const std::string tag = "T" + std::to_string(ti);
    std::vector<json> sub;
    for (const json& r : rows)
      if (r.at("part").get<std::string>() == tag) sub.push_back(r);
    json tj = aggregate_chemdist_like(cfg, sub, cfg.significance);
    tj.erase("checks");
    json entry;
    entry["T"] = cfg.t_grid[ti];
    entry["aggregate"] = std::move(tj);
    // Slope of conditional mean distance vs target radius, with a 95% CI.
    const json& fit = entry["aggregate"]["fit"];
    if (!fit.is_null()) {
      const double slope = fit["slope"].get<double>();
      const double se = fit["slope_stderr"].get<double>();
      entry["slope"] = slope;
      entry["slope_lo"] = slope - 1.959963984540054 * se;
      entry["slope_hi"] = slope + 1.959963984540054 * se;
      all_finite = all_finite && std::isfinite(slope) && std::isfinite(se);
    } else {
      entry["slope"] = nullptr;
      entry["slope_lo"] = nullptr;
      entry["slope_hi"] = nullptr;
    }
    per_t.push_back(std::move(entry));
  }
  out["per_T"] = std::move(per_t);
  json checks = json::array();
  checks.push_back(check_entry("t_sweep_finite", all_finite,
                               "all computed slopes and CIs are finite"));
  out["checks"] = std::move(checks);
  return out;
}

}  // namespace detail

inline json aggregate_rows(const ExperimentConfig& cfg,
                           const std::vector<json>& rows) {
  json out;
  out["kind"] = kind_name(cfg.kind);
  out["config"] = config_to_json(cfg);
  out["rows"] = static_cast<int64_t>(rows.size());
  json body;
  switch (cfg.kind) {
    case ExperimentKind::chemdist:
      body = detail::aggregate_chemdist(cfg, rows);
      break;
    case ExperimentKind::shape:
      body = detail::aggregate_shape(cfg, rows);
      break;
    case ExperimentKind::uniqueness:
      body = detail::aggregate_uniqueness(cfg, rows);
      break;
    case ExperimentKind::crossing:
      body = detail::aggregate_crossing(cfg, rows);
      break;
    case ExperimentKind::qip:
      body = detail::aggregate_qip(cfg, rows);
      break;
    case ExperimentKind::validate:
      body = detail::aggregate_validate(cfg, rows);
      break;
    case ExperimentKind::t_sweep:
      body = detail::aggregate_t_sweep(cfg, rows);
      break;
  }
  for (auto& [key, value] : body.items()) out[key] = std::move(value);
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<json> rows;
  switch (cfg.kind) {
    case ExperimentKind::chemdist: rows = detail::rows_chemdist(cfg); break;
    case ExperimentKind::shape: rows = detail::rows_shape(cfg); break;
    case ExperimentKind::uniqueness:
      rows = detail::rows_uniqueness(cfg);
      break;
    case ExperimentKind::crossing: rows = detail::rows_crossing(cfg); break;
    case ExperimentKind::qip: rows = detail::rows_qip(cfg); break;
    case ExperimentKind::validate: rows = detail::rows_validate(cfg); break;
    case ExperimentKind::t_sweep: rows = detail::rows_t_sweep(cfg); break;
  }
  ExperimentResult result;
  result.aggregates = aggregate_rows(cfg, rows);
  result.rows.reserve(rows.size());
  for (const json& r : rows) result.rows.push_back(r.dump());
  for (const json& c : result.aggregates.at("checks"))
    if (!c.at("pass").get<bool>())
      result.failed_checks.push_back(c.at("name").get<std::string>());
  return result;
}

}  // namespace fri
