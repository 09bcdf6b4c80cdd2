#pragma once
// Window sampler for the finitary-interlacement trajectory cloud.
//
// The process drops an independent Poisson(2du/(T+1)) number of killed walks
// at every site of Z^d.  A finite window B(N) is sampled exactly up to a
// truncation: only trajectories started inside the padded box B(N + margin)
// can be realized, and recommended_margin() picks the padding so that the
// expected number of trajectories entering the window from beyond it is
// below a caller-chosen epsilon.
//
// Determinism: the sample is a pure function of (params, window, margin,
// seed).  Per-site counts and every trajectory own private streams keyed by
// the site's absolute coordinates (and the trajectory index), so scans with
// different margins or windows agree exactly on the region they share, and
// a consumer may skip replaying any trajectory without disturbing the rest —
// the streaming visitors below exploit both.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/walk.hpp"

namespace fri {

struct FriParams {
  double u = 1.0;
  double T = 1.0;
  int d = 3;

  void validate() const {
    validate_dim(d);
    if (!(u > 0.0) || !std::isfinite(u))
      throw std::invalid_argument("FriParams: u must be finite and > 0");
    if (!(T > 0.0) || !std::isfinite(T))
      throw std::invalid_argument("FriParams: T must be finite and > 0");
  }
  // Mean number of trajectories rooted at one site.
  double site_rate() const { return 2.0 * d * u / (T + 1.0); }
  double survival() const { return T / (T + 1.0); }
};

struct ScanLimits {
  // Refuse scans whose expected work exceeds these (see expected_steps).
  double max_expected_steps = 1e9;
};

inline Box padded_box(const Box& window, int margin) {
  if (margin < 0) throw std::invalid_argument("margin must be >= 0");
  return Box{window.center, window.radius + margin};
}

// Expected total walk steps over the padded box; the companion trajectory
// count guards the T -> 0 regime where steps alone would undercount work.
inline double expected_steps(const FriParams& p, const Box& window,
                             int margin) {
  const double vol =
      static_cast<double>(box_volume(padded_box(window, margin), p.d));
  return vol * p.site_rate() * p.T;
}

inline double expected_trajectories(const FriParams& p, const Box& window,
                                    int margin) {
  const double vol =
      static_cast<double>(box_volume(padded_box(window, margin), p.d));
  return vol * p.site_rate();
}

// ---------------------------------------------------------------------------
// Margin rule.
//
// A trajectory rooted at l-infinity distance k beyond the window can enter
// it only if it both lives at least k steps and covers l-infinity distance k.
// Two exact bounds on that probability multiply the per-site rate:
//   - length tail: P(L >= k) = (T/(T+1))^k;
//   - excursion tail: P(any coordinate ever advances k) <= 2d * lambda^k,
//     where lambda solves (q/2d) l^2 - (1 - q(1-1/d)) l + (q/2d) = 0 with
//     q = T/(T+1); lambda^k is the exact probability that one fixed signed
//     coordinate of the killed walk ever advances by k.
// Summing min of the two over the shells around the window gives an upper
// bound on the expected number of entering trajectories.

inline double coordinate_escape_rate(double T, int d) {
  if (!(T > 0.0)) return 0.0;
  const double q = T / (T + 1.0);
  const double b = 1.0 - q * (1.0 - 1.0 / d);
  const double disc = b * b - (q / d) * (q / d);
  // disc >= 0 always; equality only in the unkilled limit q -> 1.
  return (b - std::sqrt(std::max(0.0, disc))) * d / q;
}

// Expected number of trajectories rooted strictly beyond B(N + margin) that
// enter B(N).
inline double margin_leak_bound(const FriParams& p, int window_radius,
                                int margin) {
  p.validate();
  if (window_radius < 0 || margin < 0)
    throw std::invalid_argument("margin_leak_bound: negative argument");
  const double rate = p.site_rate();
  const double q = p.survival();
  const double lam = coordinate_escape_rate(p.T, p.d);
  const double n = static_cast<double>(window_radius);
  double total = 0.0;
  for (int64_t k = margin + 1; k < margin + 2000000; ++k) {
    const double kk = static_cast<double>(k);
    // Sites at distance exactly k from the window form the shell of
    // B(N + k): (2(N+k)+1)^d - (2(N+k)-1)^d of them.
    const double shell = std::pow(2.0 * (n + kk) + 1.0, p.d) -
                         std::pow(2.0 * (n + kk) - 1.0, p.d);
    const double enter = std::min(std::pow(q, kk),
                                  2.0 * p.d * std::pow(lam, kk));
    const double term = rate * shell * enter;
    total += term;
    if (term < total * 1e-12 + 1e-300) {
      // Geometric completion of the remaining tail: the ratio of successive
      // terms is below decay * (1 + 1/k)^(d-1) < 1 once terms shrink.
      const double decay = std::min(q, lam) *
                           std::pow(1.0 + 1.0 / kk, p.d - 1.0);
      if (decay < 1.0) total += term * decay / (1.0 - decay);
      break;
    }
  }
  return total;
}

// Smallest margin whose leak bound is below epsilon.
inline int recommended_margin(const FriParams& p, int window_radius,
                              double epsilon) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("recommended_margin: epsilon must be > 0");
  int lo = 0, hi = 1;
  while (margin_leak_bound(p, window_radius, hi) > epsilon) {
    lo = hi;
    hi *= 2;
    if (hi > (1 << 24))
      throw std::runtime_error("recommended_margin: no feasible margin");
  }
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (margin_leak_bound(p, window_radius, mid) <= epsilon)
      hi = mid;
    else
      lo = mid + 1;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Streaming scan.
//
// The field (per-site trajectory counts) and every walk are keyed by the
// site's absolute coordinates, not by its position in the scanned box.  Two
// scans under the same master seed therefore agree exactly on every site
// they both cover: enlarging the margin, enlarging the window, or
// translating it only adds or moves trajectories, never resamples shared
// ones.  This is what makes margin truncation a coupling (the window's
// content changes only when a trajectory beyond the old margin reaches in)
// rather than a full resample.
//
// Visitor concept:
//   bool begin(const Site& start, int64_t site_key, int64_t traj_index,
//              int64_t length);   // false skips the walk entirely
//   void step(int axis, int delta);
//   void end();
//
// site_key is an opaque value, distinct per site within one scan.

namespace detail {

// Packs coordinates (21 bits each, offset-binary) into the stream key.
// Coordinates must satisfy |c| < 2^20; scan_trajectories enforces that.
inline uint64_t site_scan_key(const Site& s, int d) {
  constexpr int64_t kOff = int64_t{1} << 20;
  const auto off = [](int64_t c) { return static_cast<uint64_t>(c + kOff); };
  uint64_t key = (off(s[0]) << 42) | (off(s[1]) << 21) | off(s[2]);
  if (d >= 4) {
    uint64_t hi = off(s[3]);
    if (d >= 5) hi = (hi << 21) | off(s[4]);
    key = rng::derive(key, hi);
  }
  return key;
}

}  // namespace detail

template <class Visitor>
void scan_trajectories(const FriParams& p, const Box& window, int margin,
                       uint64_t seed, Visitor&& vis,
                       const ScanLimits& limits = {}) {
  p.validate();
  validate_box(window);
  const Box padded = padded_box(window, margin);
  constexpr int64_t kCoordCap = int64_t{1} << 20;
  for (int ax = 0; ax < p.d; ++ax)
    if (std::abs(int64_t{padded.center[ax]}) + padded.radius >= kCoordCap)
      throw std::invalid_argument(
          "scan: padded window exceeds the 2^20 coordinate bound");
  const double esteps = expected_steps(p, window, margin);
  const double etraj = expected_trajectories(p, window, margin);
  if (esteps > limits.max_expected_steps ||
      etraj > limits.max_expected_steps) {
    throw std::runtime_error(
        "scan refused: expected work " +
        std::to_string(std::max(esteps, etraj)) + " exceeds cap " +
        std::to_string(limits.max_expected_steps) +
        " (raise ScanLimits::max_expected_steps to override)");
  }

  const BoxIndexer ix(padded, p.d);
  const double lambda = p.site_rate();
  const double log_s = p.T > 0.0 ? std::log(p.survival())
                                 : -std::numeric_limits<double>::infinity();
  const uint64_t field_key = rng::derive(seed, rng::tag_field);
  const uint64_t walk_key = rng::derive(seed, rng::tag_walk);
  const uint32_t two_d = static_cast<uint32_t>(2 * p.d);
  const bool small_rate = lambda < 10.0;
  const double p0 = small_rate ? std::exp(-lambda) : 0.0;

  // Odometer walk over the padded box in index order (axis 0 most
  // significant), avoiding a div chain per site.
  Site lo{}, hi{}, cur{};
  for (int ax = 0; ax < p.d; ++ax) {
    lo[ax] = padded.center[ax] - padded.radius;
    hi[ax] = padded.center[ax] + padded.radius;
    cur[ax] = lo[ax];
  }
  for (int64_t pos = 0; pos < ix.size; ++pos) {
    const uint64_t skey = detail::site_scan_key(cur, p.d);
    int64_t n_traj = 0;
    if (small_rate) {
      // One uniform decides the site's whole count by cdf inversion; the
      // overwhelmingly common empty case costs a single key derivation.
      const double u = rng::to_open01(rng::derive(field_key, skey));
      if (u > p0) {
        n_traj = rng::detail::poisson_inversion(lambda, u);
        if (n_traj < 1) n_traj = 1;
      }
    } else {
      rng::Stream fs(rng::derive(field_key, skey));
      n_traj = rng::poisson(fs, lambda);
    }
    for (int64_t k = 0; k < n_traj; ++k) {
      rng::Stream ws(rng::derive(walk_key, skey, static_cast<uint64_t>(k)));
      const int64_t len = rng::geometric_with_log(ws, log_s);
      if (vis.begin(cur, static_cast<int64_t>(skey), k, len)) {
        for (int64_t i = 0; i < len; ++i) {
          const int dir = static_cast<int>(ws.next_below(two_d));
          vis.step(dir >> 1, (dir & 1) ? 1 : -1);
        }
        vis.end();
      }
    }
    for (int ax = p.d - 1; ax >= 0; --ax) {
      if (cur[ax] < hi[ax]) {
        ++cur[ax];
        break;
      }
      cur[ax] = lo[ax];
    }
  }
}

// ---------------------------------------------------------------------------
// Materialized samples.

struct FriSample {
  FriParams params;
  Box window;
  int margin = 0;
  uint64_t seed = 0;
  std::vector<Trajectory> trajectories;  // padded-box packed scan order
};

namespace detail {

struct Materializer {
  std::vector<Trajectory>* out;
  Trajectory* cur = nullptr;
  Site pos{};

  bool begin(const Site& start, int64_t, int64_t, int64_t len) {
    out->emplace_back();
    cur = &out->back();
    cur->start = start;
    cur->dirs.reserve(static_cast<size_t>(len));
    pos = start;
    return true;
  }
  void step(int axis, int delta) {
    cur->dirs.push_back(
        static_cast<uint8_t>(2 * axis + (delta > 0 ? 1 : 0)));
  }
  void end() {}
};

}  // namespace detail

inline FriSample sample_window(const FriParams& p, const Box& window,
                               int margin, uint64_t seed,
                               const ScanLimits& limits = {}) {
  FriSample s;
  s.params = p;
  s.window = window;
  s.margin = margin;
  s.seed = seed;
  detail::Materializer m{&s.trajectories};
  scan_trajectories(p, window, margin, seed, m, limits);
  return s;
}

// Split the sample's intensity into parts proportional to `weights` (which
// must sum to 1 within 1e-12).  Each part is a freshly sampled, mutually
// independent process at intensity w_i * u with a seed derived from the
// parent's; the union of the parts equals the original in distribution.
inline std::vector<FriSample> thin(const FriSample& s,
                                   const std::vector<double>& weights,
                                   const ScanLimits& limits = {}) {
  if (weights.empty()) throw std::invalid_argument("thin: empty weights");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("thin: weights must be > 0");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("thin: weights must sum to 1 (got " +
                                std::to_string(sum) + ")");
  std::vector<FriSample> parts;
  parts.reserve(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    FriParams q = s.params;
    q.u = s.params.u * weights[i];
    parts.push_back(sample_window(
        q, s.window, s.margin,
        rng::derive(s.seed, rng::tag_thin, static_cast<uint64_t>(i)), limits));
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Lucky paths: trajectories rooted in the annulus between B_x(inner sqrt(T))
// and B_x(outer sqrt(T)) that hit A and still have at least T steps left after
// the first hit.  A must sit inside B_x(1.5 sqrt(T)) and the annulus inside
// the sampled padded box, else the count would be truncated.  At the default
// factors 6/8 the walk must cover ~4.5 sqrt(T) within a geometric(1/(T+1))
// lifetime, so counts are ~0 at any feasible replica budget; callers that
// want observable counts pass smaller factors.

inline int64_t lucky_path_count(const FriSample& s, const Site& x,
                                const Box& a, double inner_factor = 6.0,
                                double outer_factor = 8.0) {
  if (!(inner_factor > 0.0) || !(outer_factor > inner_factor))
    throw std::invalid_argument("lucky_path_count: bad annulus factors");
  const int d = s.params.d;
  const double rt = std::sqrt(s.params.T);
  const int32_t r_outer = static_cast<int32_t>(std::floor(outer_factor * rt));
  const int32_t r_inner = static_cast<int32_t>(std::floor(inner_factor * rt));
  if (linf_distance(x, a.center, d) + a.radius >
      static_cast<int32_t>(std::floor(1.5 * rt)))
    throw std::invalid_argument("lucky_path_count: A exceeds B_x(1.5 sqrt T)");
  const Box padded = padded_box(s.window, s.margin);
  if (linf_distance(x, padded.center, d) + r_outer > padded.radius)
    throw std::invalid_argument(
        "lucky_path_count: annulus outside sampled region");
  const double min_len = s.params.T;
  int64_t count = 0;
  for (const Trajectory& t : s.trajectories) {
    const int32_t dist = linf_distance(t.start, x, d);
    if (dist <= r_inner || dist > r_outer) continue;
    const int64_t m = first_hit_index(t, d, a);
    if (m < 0) continue;
    if (static_cast<double>(t.length() - m) >= min_len) ++count;
  }
  return count;
}

// Trajectories whose range meets A at all (the hitting multiset); the
// intersection-with-domain filter kept alongside the suffix decomposition.
inline std::vector<const Trajectory*> trajectories_hitting(
    const FriSample& s, const Box& a) {
  std::vector<const Trajectory*> out;
  for (const Trajectory& t : s.trajectories)
    if (first_hit_index(t, s.params.d, a) >= 0) out.push_back(&t);
  return out;
}

}  // namespace fri
