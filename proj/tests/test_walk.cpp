#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "fri/potential.hpp"
#include "fri/rng.hpp"
#include "fri/walk.hpp"

using namespace fri;

TEST_CASE("kill params validate") {
  REQUIRE(KillParams{9.0}.survival() == Catch::Approx(0.9));
  REQUIRE_THROWS_AS(KillParams{-1.0}.validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(
      KillParams{std::numeric_limits<double>::infinity()}.validate(),
      std::invalid_argument);
  KillParams{0.0}.validate();  // zero lifetime is legal: length always 0
}

TEST_CASE("killed walk lengths are geometric and steps are unit moves") {
  const int d = 3;
  const KillParams kp{9.0};
  std::vector<int64_t> len_hist(1, 0);
  std::vector<int64_t> dir_counts(2 * d, 0);
  const Site start = make_site({1, 2, 3});
  for (int i = 0; i < 60000; ++i) {
    rng::Stream g(rng::derive(55, static_cast<uint64_t>(i)));
    const Trajectory t = sample_killed_walk(start, d, kp, g);
    REQUIRE(t.start == start);
    if (t.length() >= static_cast<int64_t>(len_hist.size()))
      len_hist.resize(static_cast<size_t>(t.length()) + 1, 0);
    ++len_hist[static_cast<size_t>(t.length())];
    for (uint8_t dir : t.dirs) {
      REQUIRE(dir < 2 * d);
      ++dir_counts[dir];
    }
  }
  const stats::TestResult gof =
      stats::geometric_gof(len_hist, 1.0 / (kp.T + 1.0), 0.01);
  REQUIRE(!gof.reject);
  // Directions are uniform over the 2d unit moves.
  int64_t total = 0;
  for (int64_t c : dir_counts) total += c;
  const double mean = static_cast<double>(total) / (2 * d);
  const double sd = std::sqrt(mean * (1.0 - 1.0 / (2 * d)));
  for (int dir = 0; dir < 2 * d; ++dir)
    REQUIRE(std::abs(static_cast<double>(dir_counts[static_cast<size_t>(
                dir)]) - mean) < 4.5 * sd);
}

TEST_CASE("zero lifetime walks never move") {
  rng::Stream g(7);
  for (int i = 0; i < 50; ++i) {
    const Trajectory t =
        sample_killed_walk(make_site({0, 0, 0}), 3, KillParams{0.0}, g);
    REQUIRE(t.length() == 0);
  }
}

TEST_CASE("positions traces the trajectory site by site") {
  Trajectory t;
  t.start = make_site({0, 0, 0});
  // axis = dir >> 1, odd dir moves +1 on that axis.
  t.dirs = {0, 0, 3, 4};
  const std::vector<Site> ps = positions(t, 3);
  REQUIRE(ps.size() == 5);
  REQUIRE(ps[0] == make_site({0, 0, 0}));
  REQUIRE(ps[1] == make_site({-1, 0, 0}));
  REQUIRE(ps[2] == make_site({-2, 0, 0}));
  REQUIRE(ps[3] == make_site({-2, 1, 0}));
  REQUIRE(ps[4] == make_site({-2, 1, -1}));
  for (size_t i = 1; i < ps.size(); ++i)
    REQUIRE(linf_distance(ps[i - 1], ps[i], 3) == 1);
}

TEST_CASE("first hit index and suffix after hit") {
  Trajectory t;
  t.start = make_site({3, 0, 0});
  t.dirs = {0, 0, 0};  // marches toward -x: 3 -> 2 -> 1 -> 0
  const Box target{Site{}, 1};
  REQUIRE(first_hit_index(t, 3, target) == 2);  // reaches x = 1 after 2 steps
  const Trajectory suf = suffix_after_hit(t, 3, target);
  REQUIRE(suf.start == make_site({1, 0, 0}));
  REQUIRE(suf.length() == 1);
  REQUIRE(positions(suf, 3).back() == make_site({0, 0, 0}));

  Trajectory away;
  away.start = make_site({3, 0, 0});
  away.dirs = {1, 1};  // +x, never meets the target
  REQUIRE(first_hit_index(away, 3, target) == -1);
  REQUIRE_THROWS_AS(suffix_after_hit(away, 3, target), std::invalid_argument);

  Trajectory inside;
  inside.start = make_site({0, 1, 0});
  REQUIRE(first_hit_index(inside, 3, target) == 0);
  const Trajectory whole = suffix_after_hit(inside, 3, target);
  REQUIRE(whole.start == inside.start);
  REQUIRE(whole.length() == inside.length());
}

TEST_CASE("lazy cluster step stays in the set and matches the kernel") {
  const std::set<Site> s_set{make_site({0, 0, 0}), make_site({1, 0, 0}),
                             make_site({0, 1, 0})};
  const auto in_s = [&](const Site& z) { return s_set.count(z) > 0; };
  rng::Stream g(321);
  std::map<Site, int64_t> counts;
  const int n = 200000;
  const Site origin = make_site({0, 0, 0});
  for (int i = 0; i < n; ++i) {
    const Site next = lazy_cluster_step(origin, 3, in_s, g);
    REQUIRE(in_s(next));
    ++counts[next];
  }
  // From the origin: two neighbors lie in S, each taken with probability
  // 1/6; the walk stays put with probability 4/6.
  const double sd = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
  REQUIRE(std::abs(static_cast<double>(counts[make_site({1, 0, 0})]) -
                   n / 6.0) < 4.0 * sd);
  REQUIRE(std::abs(static_cast<double>(counts[make_site({0, 1, 0})]) -
                   n / 6.0) < 4.0 * sd);
  REQUIRE(std::abs(static_cast<double>(counts[origin]) - 4.0 * n / 6.0) <
          4.0 * sd);
}

TEST_CASE("escape probability matches the green function identity") {
  // For the simple random walk in d = 3, P(never return to 0) = 1 / G(0).
  const double g0 = green(3, 1.0, 1e-10, Site{});
  const EscapeEstimate est =
      escape_probability_mc({Site{}}, Site{}, 3, 50, 60000, 99);
  // Truncating at radius 50 inflates the estimate by the return chance from
  // that distance, below 0.7 percent in d = 3.
  REQUIRE(est.p_hat >= 1.0 / g0 - 4.0 * est.stderr_p);
  REQUIRE(est.p_hat <= 1.0 / g0 + 0.007 + 4.0 * est.stderr_p);
}

TEST_CASE("escape probability rejects bad arguments") {
  REQUIRE_THROWS_AS(escape_probability_mc({}, Site{}, 3, 10, 10, 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(
      escape_probability_mc({Site{}}, make_site({5, 0, 0}), 3, 10, 10, 1),
      std::invalid_argument);
  REQUIRE_THROWS_AS(escape_probability_mc({Site{}}, Site{}, 3, 0, 10, 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(escape_probability_mc({Site{}}, Site{}, 3, 10, 0, 1),
                    std::invalid_argument);
}
