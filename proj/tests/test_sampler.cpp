#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "fri/rng.hpp"
#include "fri/sampler.hpp"

using namespace fri;

namespace {

// Records every trajectory keyed by (root site, per-site index) so two scans
// can be compared entry by entry.
struct Collector {
  std::map<std::pair<Site, int64_t>, std::vector<uint8_t>>* out;
  std::pair<Site, int64_t> key;
  std::vector<uint8_t> dirs;

  bool begin(const Site& start, int64_t, int64_t k, int64_t len) {
    key = {start, k};
    dirs.clear();
    dirs.reserve(static_cast<size_t>(len));
    return true;
  }
  void step(int axis, int delta) {
    dirs.push_back(static_cast<uint8_t>(2 * axis + (delta > 0 ? 1 : 0)));
  }
  void end() { (*out)[key] = dirs; }
};

// Set of window sites touched by any trajectory.
struct WindowOccupancy {
  Box window;
  int d = 3;
  std::set<Site>* occ;
  Site pos{};

  bool begin(const Site& start, int64_t, int64_t, int64_t) {
    pos = start;
    add();
    return true;
  }
  void add() {
    if (box_contains(window, pos, d)) occ->insert(pos);
  }
  void step(int axis, int delta) {
    pos[axis] += delta;
    add();
  }
  void end() {}
};

}  // namespace

TEST_CASE("fri params validate and expose exact rates") {
  FriParams p{0.75, 3.0, 4};
  p.validate();
  REQUIRE(p.site_rate() == Catch::Approx(1.5));
  REQUIRE(p.survival() == Catch::Approx(0.75));

  REQUIRE_THROWS_AS((FriParams{0.0, 1.0, 3}.validate()),
                    std::invalid_argument);
  REQUIRE_THROWS_AS((FriParams{-1.0, 1.0, 3}.validate()),
                    std::invalid_argument);
  REQUIRE_THROWS_AS((FriParams{1.0, 0.0, 3}.validate()),
                    std::invalid_argument);
  REQUIRE_THROWS_AS((FriParams{1.0, 1.0, 2}.validate()),
                    std::invalid_argument);
  REQUIRE_THROWS_AS((FriParams{1.0, 1.0, 6}.validate()),
                    std::invalid_argument);
  const double inf = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS((FriParams{inf, 1.0, 3}.validate()),
                    std::invalid_argument);
}

TEST_CASE("expected work formulas") {
  const FriParams p{1.0, 5.0, 3};
  const Box w{Site{}, 4};
  // Padded box B(6): 13^3 sites, rate 6/6 = 1, mean length 5.
  REQUIRE(expected_trajectories(p, w, 2) == Catch::Approx(2197.0));
  REQUIRE(expected_steps(p, w, 2) == Catch::Approx(5.0 * 2197.0));
  REQUIRE_THROWS_AS(padded_box(w, -1), std::invalid_argument);
}

TEST_CASE("coordinate escape rate matches a direct simulation") {
  // The rate r solves the first-step equation for a single signed coordinate
  // of the killed walk reaching +1, so P(sup of that coordinate >= k) = r^k.
  const double T = 4.0;
  const int d = 3;
  const double r = coordinate_escape_rate(T, d);
  REQUIRE(r > 0.0);
  REQUIRE(r < 1.0);
  const int n = 200000;
  int hit1 = 0, hit2 = 0;
  for (int i = 0; i < n; ++i) {
    rng::Stream g(rng::derive(1234, static_cast<uint64_t>(i)));
    const Trajectory t =
        sample_killed_walk(make_site({0, 0, 0}), d, KillParams{T}, g);
    int32_t x = 0, best = 0;
    for (uint8_t dir : t.dirs) {
      if (direction_axis(dir) == 0) x += direction_delta(dir);
      best = std::max(best, x);
    }
    if (best >= 1) ++hit1;
    if (best >= 2) ++hit2;
  }
  const auto frac = [&](int c) { return static_cast<double>(c) / n; };
  const auto sd = [&](double q) { return std::sqrt(q * (1.0 - q) / n); };
  REQUIRE(std::abs(frac(hit1) - r) < 4.0 * sd(r));
  REQUIRE(std::abs(frac(hit2) - r * r) < 4.0 * sd(r * r));
  REQUIRE(coordinate_escape_rate(0.0, d) == 0.0);
  // More lifetime, easier escape.
  REQUIRE(coordinate_escape_rate(8.0, d) > r);
}

TEST_CASE("margin leak bound decreases and recommended margin is minimal") {
  const FriParams p{1.0, 10.0, 3};
  double prev = margin_leak_bound(p, 8, 0);
  REQUIRE(prev > 0.0);
  for (int m = 1; m <= 30; ++m) {
    const double cur = margin_leak_bound(p, 8, m);
    REQUIRE(cur <= prev);
    prev = cur;
  }
  for (double eps : {0.5, 1e-2, 1e-4}) {
    const int m = recommended_margin(p, 8, eps);
    REQUIRE(margin_leak_bound(p, 8, m) <= eps);
    if (m > 0) REQUIRE(margin_leak_bound(p, 8, m - 1) > eps);
  }
  REQUIRE_THROWS_AS(recommended_margin(p, 8, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(margin_leak_bound(p, -1, 0), std::invalid_argument);
}

TEST_CASE("scan refuses oversized work and out-of-range coordinates") {
  const FriParams p{1.0, 5.0, 3};
  std::map<std::pair<Site, int64_t>, std::vector<uint8_t>> sink;
  Collector c{&sink, {}, {}};
  ScanLimits tiny;
  tiny.max_expected_steps = 10.0;
  REQUIRE_THROWS_AS(scan_trajectories(p, Box{Site{}, 4}, 0, 1, c, tiny),
                    std::runtime_error);
  const Box far{make_site({(1 << 20) - 2, 0, 0}), 1};
  REQUIRE_THROWS_AS(scan_trajectories(p, far, 1, 1, c),
                    std::invalid_argument);
}

TEST_CASE("scan emits begin lengths that match the steps delivered") {
  struct Checker {
    int64_t announced = -1;
    int64_t delivered = 0;
    int64_t trajectories = 0;
    bool fail = false;
    bool begin(const Site&, int64_t, int64_t, int64_t len) {
      announced = len;
      delivered = 0;
      ++trajectories;
      return true;
    }
    void step(int, int delta) {
      ++delivered;
      fail = fail || !(delta == 1 || delta == -1);
    }
    void end() { fail = fail || delivered != announced; }
  } chk;
  const FriParams p{1.0, 5.0, 3};
  scan_trajectories(p, Box{Site{}, 8}, 0, 77, chk);
  REQUIRE(!chk.fail);
  // Total trajectory count is Poisson with the advertised mean: 17^3 sites
  // at rate 1.
  const double mean = expected_trajectories(p, Box{Site{}, 8}, 0);
  REQUIRE(std::abs(static_cast<double>(chk.trajectories) - mean) <
          4.5 * std::sqrt(mean));
}

TEST_CASE("skipping a trajectory does not disturb the others") {
  const FriParams p{1.0, 5.0, 3};
  const Box w{Site{}, 4};
  std::map<std::pair<Site, int64_t>, std::vector<uint8_t>> full;
  Collector call{&full, {}, {}};
  scan_trajectories(p, w, 2, 9, call);

  struct EveryOther {
    Collector inner;
    int64_t seen = 0;
    bool begin(const Site& s, int64_t sk, int64_t k, int64_t len) {
      if ((seen++ & 1) == 0) return false;  // skip half without replaying
      return inner.begin(s, sk, k, len);
    }
    void step(int axis, int delta) { inner.step(axis, delta); }
    void end() { inner.end(); }
  };
  std::map<std::pair<Site, int64_t>, std::vector<uint8_t>> half;
  EveryOther eo{Collector{&half, {}, {}}, 0};
  scan_trajectories(p, w, 2, 9, eo);

  REQUIRE(half.size() * 2 <= full.size() + 1);
  for (const auto& [key, dirs] : half) {
    auto it = full.find(key);
    REQUIRE(it != full.end());
    REQUIRE(it->second == dirs);
  }
}

TEST_CASE("larger margins only add trajectories") {
  const FriParams p{1.0, 5.0, 3};
  const Box w{Site{}, 5};
  std::map<std::pair<Site, int64_t>, std::vector<uint8_t>> small, large;
  Collector cs{&small, {}, {}}, cl{&large, {}, {}};
  scan_trajectories(p, w, 3, 42, cs);
  scan_trajectories(p, w, 9, 42, cl);
  REQUIRE(small.size() < large.size());
  for (const auto& [key, dirs] : small) {
    auto it = large.find(key);
    REQUIRE(it != large.end());
    REQUIRE(it->second == dirs);
  }
  const Box inner_pad = padded_box(w, 3);
  for (const auto& [key, dirs] : large) {
    if (small.count(key)) continue;
    // Every extra trajectory is rooted outside the smaller padded box.
    REQUIRE(!box_contains(inner_pad, key.first, p.d));
  }
}

TEST_CASE("overlapping windows agree on shared roots") {
  const FriParams p{1.0, 5.0, 3};
  const Box wa{Site{}, 5};
  const Box wb{make_site({4, 3, -2}), 5};
  std::map<std::pair<Site, int64_t>, std::vector<uint8_t>> a, b;
  Collector ca{&a, {}, {}}, cb{&b, {}, {}};
  scan_trajectories(p, wa, 3, 777, ca);
  scan_trajectories(p, wb, 3, 777, cb);
  const Box pa = padded_box(wa, 3);
  const Box pb = padded_box(wb, 3);
  int64_t shared = 0;
  for (const auto& [key, dirs] : a) {
    if (!box_contains(pb, key.first, p.d)) continue;
    ++shared;
    auto it = b.find(key);
    REQUIRE(it != b.end());
    REQUIRE(it->second == dirs);
  }
  for (const auto& [key, dirs] : b)
    if (box_contains(pa, key.first, p.d)) REQUIRE(a.count(key) == 1);
  REQUIRE(shared > 100);  // the overlap is big enough to mean something
}

TEST_CASE("margin truncation is a rare-event coupling") {
  // At the recommended margin for epsilon, raising the margin further may
  // only add window content, and does so in at most a 2*epsilon fraction of
  // replicas.
  const FriParams p{1.0, 5.0, 3};
  const int n_win = 4;
  const double eps = 0.05;
  const int m_lo = recommended_margin(p, n_win, eps);
  const int m_hi = recommended_margin(p, n_win, 1e-4);
  REQUIRE(m_lo < m_hi);
  const Box w{Site{}, n_win};
  const int reps = 150;
  int changed = 0;
  for (int rep = 0; rep < reps; ++rep) {
    const uint64_t seed = rng::derive(4242, static_cast<uint64_t>(rep));
    std::set<Site> occ_lo, occ_hi;
    WindowOccupancy va{w, p.d, &occ_lo, {}};
    WindowOccupancy vb{w, p.d, &occ_hi, {}};
    scan_trajectories(p, w, m_lo, seed, va);
    scan_trajectories(p, w, m_hi, seed, vb);
    for (const Site& s : occ_lo) REQUIRE(occ_hi.count(s) == 1);
    if (occ_lo.size() != occ_hi.size()) ++changed;
  }
  REQUIRE(static_cast<double>(changed) <= 2.0 * eps * reps);
}

TEST_CASE("sample window is deterministic and materializes the scan") {
  const FriParams p{1.0, 5.0, 3};
  const Box w{Site{}, 4};
  const FriSample s1 = sample_window(p, w, 2, 31);
  const FriSample s2 = sample_window(p, w, 2, 31);
  REQUIRE(s1.trajectories.size() == s2.trajectories.size());
  for (size_t i = 0; i < s1.trajectories.size(); ++i) {
    REQUIRE(s1.trajectories[i].start == s2.trajectories[i].start);
    REQUIRE(s1.trajectories[i].dirs == s2.trajectories[i].dirs);
  }
  REQUIRE(s1.margin == 2);
  REQUIRE(s1.seed == 31);
  // Different seeds give different clouds.
  const FriSample s3 = sample_window(p, w, 2, 32);
  bool any_diff = s3.trajectories.size() != s1.trajectories.size();
  for (size_t i = 0; !any_diff && i < s1.trajectories.size(); ++i)
    any_diff = !(s1.trajectories[i].start == s3.trajectories[i].start) ||
               s1.trajectories[i].dirs != s3.trajectories[i].dirs;
  REQUIRE(any_diff);
}

TEST_CASE("thinning validates weights and preserves total intensity") {
  const FriParams p{1.0, 5.0, 3};
  const Box w{Site{}, 4};
  const FriSample s = sample_window(p, w, 2, 5);
  REQUIRE_THROWS_AS(thin(s, {}), std::invalid_argument);
  REQUIRE_THROWS_AS(thin(s, {0.5, 0.6}), std::invalid_argument);
  REQUIRE_THROWS_AS(thin(s, {1.5, -0.5}), std::invalid_argument);

  const std::vector<double> ws{0.2, 0.3, 0.5};
  double union_mean = 0.0, full_mean = 0.0;
  const int reps = 30;
  for (int rep = 0; rep < reps; ++rep) {
    const FriSample f = sample_window(p, w, 2, rng::derive(88, rep));
    const std::vector<FriSample> parts = thin(f, ws);
    REQUIRE(parts.size() == 3);
    int64_t together = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      REQUIRE(parts[i].params.u == Catch::Approx(ws[i]));
      together += static_cast<int64_t>(parts[i].trajectories.size());
    }
    union_mean += static_cast<double>(together) / reps;
    full_mean += static_cast<double>(f.trajectories.size()) / reps;
  }
  // Both are Poisson with mean 13^3; their averages over 30 replicas agree
  // to within four standard errors of the difference.
  const double se = std::sqrt(2.0 * 2197.0 / reps);
  REQUIRE(std::abs(union_mean - full_mean) < 4.0 * se);
}

TEST_CASE("lucky path count on a hand-built sample") {
  FriSample s;
  s.params = FriParams{1.0, 4.0, 3};  // sqrt(T) = 2
  s.window = Box{Site{}, 10};
  s.margin = 0;
  const Site x = make_site({0, 0, 0});
  const Box a{Site{}, 1};
  // Annulus factors 1.0 and 2.5: roots with 2 < |root| <= 5 qualify.
  Trajectory good;  // rooted at distance 3, hits A, >= T steps remain
  good.start = make_site({3, 0, 0});
  good.dirs = {0, 0, 1, 0, 1, 0};  // hits x=1 at step 2, length 6
  Trajectory close;  // rooted at distance 2: inside the inner ball
  close.start = make_site({2, 0, 0});
  close.dirs = {0, 0, 1, 0, 1, 0};
  Trajectory tired;  // hits A but with only 1 step left
  tired.start = make_site({0, 3, 0});
  tired.dirs = {2, 2, 2};
  Trajectory misser;  // stays outside A
  misser.start = make_site({4, 0, 0});
  misser.dirs = {1, 1, 1, 1, 1, 1};
  s.trajectories = {good, close, tired, misser};

  REQUIRE(lucky_path_count(s, x, a, 1.0, 2.5) == 1);
  REQUIRE(trajectories_hitting(s, a).size() == 3);  // good, close, tired

  REQUIRE_THROWS_AS(lucky_path_count(s, x, a, 0.0, 2.5),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(lucky_path_count(s, x, a, 2.5, 1.0),
                    std::invalid_argument);
  // A target bigger than B_x(1.5 sqrt T) is rejected.
  REQUIRE_THROWS_AS(lucky_path_count(s, x, Box{Site{}, 4}, 1.0, 2.5),
                    std::invalid_argument);
  // An annulus poking beyond the sampled padded box is rejected.
  REQUIRE_THROWS_AS(
      lucky_path_count(s, make_site({9, 0, 0}), Box{make_site({9, 0, 0}), 1},
                       1.0, 2.5),
      std::invalid_argument);
}
