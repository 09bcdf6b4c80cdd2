#pragma once
// Geometrically killed simple random walks on Z^d and path operations.
//
// Killing happens before each step: with probability 1/(T+1) the walk dies
// where it stands, so the path length L (number of steps) is Geometric on
// {0,1,2,...} with success probability 1/(T+1) and E[L] = T.  A length-0
// trajectory still occupies its start site.
//
// Stream convention: sampling a trajectory consumes one geometric length
// draw followed by exactly L direction draws, in that order.  The window
// sampler, serialization replays and all tests rely on this layout.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fri/lattice.hpp"
#include "fri/rng.hpp"

namespace fri {

struct KillParams {
  double T = 1.0;  // expected lifetime; kill probability per step is 1/(T+1)

  double survival() const { return T / (T + 1.0); }
  void validate() const {
    if (!(T >= 0.0) || !std::isfinite(T))
      throw std::invalid_argument("KillParams: T must be finite and >= 0");
  }
};

struct Trajectory {
  Site start{};
  std::vector<uint8_t> dirs;  // direction codes; axis = dir>>1, odd = plus

  int64_t length() const { return static_cast<int64_t>(dirs.size()); }
};

inline Trajectory sample_killed_walk(const Site& start, int d,
                                     const KillParams& kp, rng::Stream& g) {
  validate_dim(d);
  kp.validate();
  Trajectory t;
  t.start = start;
  const int64_t len = rng::geometric(g, kp.survival());
  t.dirs.reserve(static_cast<size_t>(len));
  for (int64_t i = 0; i < len; ++i)
    t.dirs.push_back(static_cast<uint8_t>(g.next_below(2 * d)));
  return t;
}

// All visited sites in order, the start included; length() + 1 entries.
inline std::vector<Site> positions(const Trajectory& t,
                                   [[maybe_unused]] int d) {
  std::vector<Site> out;
  out.reserve(t.dirs.size() + 1);
  Site cur = t.start;
  out.push_back(cur);
  for (uint8_t dir : t.dirs) {
    cur[direction_axis(dir)] += direction_delta(dir);
    out.push_back(cur);
  }
  return out;
}

// Index of the first visit to A (0 = the start itself), or -1 if the
// trajectory never meets A.
template <class Pred>
inline int64_t first_hit_index(const Trajectory& t, [[maybe_unused]] int d,
                               Pred&& in_a) {
  Site cur = t.start;
  if (in_a(cur)) return 0;
  int64_t i = 0;
  for (uint8_t dir : t.dirs) {
    cur[direction_axis(dir)] += direction_delta(dir);
    ++i;
    if (in_a(cur)) return i;
  }
  return -1;
}

inline int64_t first_hit_index(const Trajectory& t, int d, const Box& a) {
  return first_hit_index(t, d,
                         [&](const Site& s) { return box_contains(a, s, d); });
}

// The suffix of the trajectory from its first visit to A onward; empty
// domain is an error, so callers must check first_hit_index >= 0 themselves
// when unsure.  Used for the hitting decomposition of trajectory clouds.
inline Trajectory suffix_after_hit(const Trajectory& t, int d, const Box& a) {
  const int64_t m = first_hit_index(t, d, a);
  if (m < 0)
    throw std::invalid_argument("suffix_after_hit: trajectory misses the set");
  Trajectory out;
  Site cur = t.start;
  for (int64_t i = 0; i < m; ++i) {
    const uint8_t dir = t.dirs[static_cast<size_t>(i)];
    cur[direction_axis(dir)] += direction_delta(dir);
  }
  out.start = cur;
  out.dirs.assign(t.dirs.begin() + m, t.dirs.end());
  return out;
}

// One step of the lazy walk on an occupied vertex set S: draw a direction
// uniformly from the 2d options, move if that neighbor belongs to S, stay
// put otherwise.  Staying probability at y is 1 - deg_S(y)/2d.
template <class Membership>
inline Site lazy_cluster_step(const Site& y, int d, Membership&& in_s,
                              rng::Stream& g) {
  const int dir = static_cast<int>(g.next_below(static_cast<uint32_t>(2 * d)));
  Site z = offset_site(y, direction_axis(dir), direction_delta(dir));
  return in_s(z) ? z : y;
}

// Monte-carlo escape probability of an unkilled simple random walk: the
// chance that a walk from x in K reaches l-infinity distance R from K before
// returning to K.  This upper-bounds the true escape-to-infinity probability
// by the chance of a return after distance R; the exact solver quantifies
// that bias, and the pair cross-validates both implementations.
struct EscapeEstimate {
  double p_hat = 0.0;
  double stderr_p = 0.0;
  int64_t replicas = 0;
};

inline EscapeEstimate escape_probability_mc(const std::vector<Site>& k_set,
                                            const Site& x, int d, int r_escape,
                                            int64_t replicas, uint64_t seed) {
  validate_dim(d);
  if (k_set.empty()) throw std::invalid_argument("escape mc: empty set");
  if (k_set.size() > 4096) throw std::invalid_argument("escape mc: set too big");
  if (r_escape < 1) throw std::invalid_argument("escape mc: r_escape < 1");
  if (replicas < 1) throw std::invalid_argument("escape mc: replicas < 1");
  bool x_in = false;
  for (const Site& s : k_set) x_in = x_in || s == x;
  if (!x_in) throw std::invalid_argument("escape mc: x must lie in K");

  int64_t escaped = 0;
  for (int64_t rep = 0; rep < replicas; ++rep) {
    rng::Stream g(rng::derive(seed, rng::tag_mc, static_cast<uint64_t>(rep)));
    Site cur = x;
    for (;;) {
      const int dir =
          static_cast<int>(g.next_below(static_cast<uint32_t>(2 * d)));
      cur[direction_axis(dir)] += direction_delta(dir);
      int32_t dist = std::numeric_limits<int32_t>::max();
      bool returned = false;
      for (const Site& s : k_set) {
        const int32_t v = linf_distance(cur, s, d);
        dist = std::min(dist, v);
        if (v == 0) {
          returned = true;
          break;
        }
      }
      if (returned) break;
      if (dist >= r_escape) {
        ++escaped;
        break;
      }
    }
  }
  EscapeEstimate e;
  e.replicas = replicas;
  e.p_hat = static_cast<double>(escaped) / static_cast<double>(replicas);
  e.stderr_p =
      std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(replicas));
  return e;
}

}  // namespace fri
