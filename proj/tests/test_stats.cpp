#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/stats.hpp"

using namespace fri;
namespace st = fri::stats;

TEST_CASE("summarize and quantile") {
  const std::vector<double> xs{4.0, 1.0, 3.0, 2.0};
  const st::SummaryStats s = st::summarize(xs);
  REQUIRE(s.n == 4);
  REQUIRE(s.mean == Catch::Approx(2.5));
  REQUIRE(s.var == Catch::Approx(5.0 / 3.0));  // unbiased
  REQUIRE(s.min == 1.0);
  REQUIRE(s.max == 4.0);
  REQUIRE(s.stderr_mean() == Catch::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  REQUIRE(st::quantile(xs, 0.0) == 1.0);
  REQUIRE(st::quantile(xs, 1.0) == 4.0);
  REQUIRE(st::quantile(xs, 0.5) == Catch::Approx(2.5));
  REQUIRE(st::quantile({5.0}, 0.99) == 5.0);
}

TEST_CASE("special functions hit known anchors") {
  // Normal quantiles.
  REQUIRE(st::normal_quantile(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-9));
  REQUIRE(st::normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(st::normal_quantile(0.025) ==
          Catch::Approx(-1.959963984540054).epsilon(1e-9));
  // Chi-square survival: sf(x;1) = 2(1 - Phi(sqrt(x))).
  REQUIRE(st::chi_square_sf(3.841458820694124, 1) ==
          Catch::Approx(0.05).epsilon(1e-8));
  // sf(x;2) = exp(-x/2).
  REQUIRE(st::chi_square_sf(4.605170185988091, 2) ==
          Catch::Approx(0.1).epsilon(1e-10));
  REQUIRE(st::chi_square_sf(0.0, 5) == Catch::Approx(1.0));
}

TEST_CASE("wilson interval brackets the point estimate") {
  const st::Interval iv = st::wilson_interval(40, 100);
  REQUIRE(iv.lo < 0.4);
  REQUIRE(iv.hi > 0.4);
  REQUIRE(iv.lo > 0.3);
  REQUIRE(iv.hi < 0.51);
  // Zero successes: lo pinned at 0, hi = z^2/(n+z^2).
  const st::Interval z = st::wilson_interval(0, 500);
  REQUIRE(z.lo == 0.0);
  const double q = st::normal_quantile(0.975);
  REQUIRE(q == Catch::Approx(1.959963984540054).epsilon(1e-8));
  const double zz = q * q;
  REQUIRE(z.hi == Catch::Approx(zz / (500.0 + zz)).epsilon(1e-12));
  // Full successes mirror.
  const st::Interval f = st::wilson_interval(500, 500);
  REQUIRE(f.hi == 1.0);
  REQUIRE(f.lo == Catch::Approx(1.0 - zz / (500.0 + zz)).epsilon(1e-9));
}

namespace {

std::vector<int64_t> sampled_hist(double lambda, int n, uint64_t seed) {
  rng::Stream g(seed);
  std::vector<int64_t> h(1, 0);
  for (int i = 0; i < n; ++i) {
    const int64_t x = rng::poisson(g, lambda);
    if (x >= static_cast<int64_t>(h.size())) h.resize(x + 1, 0);
    ++h[x];
  }
  return h;
}

std::vector<int64_t> sampled_geom_hist(double s, int n, uint64_t seed) {
  rng::Stream g(seed);
  std::vector<int64_t> h(1, 0);
  for (int i = 0; i < n; ++i) {
    const int64_t x = rng::geometric(g, s);
    if (x >= static_cast<int64_t>(h.size())) h.resize(x + 1, 0);
    ++h[x];
  }
  return h;
}

}  // namespace

TEST_CASE("poisson gof accepts the true law and rejects a wrong one") {
  const std::vector<int64_t> h = sampled_hist(2.5, 20000, 101);
  const st::TestResult ok = st::poisson_gof(h, 2.5, 0.01);
  REQUIRE(!ok.reject);
  REQUIRE(ok.p_value > 0.01);
  const st::TestResult bad = st::poisson_gof(h, 3.0, 0.01);
  REQUIRE(bad.reject);
}

TEST_CASE("geometric gof accepts the true law and rejects a wrong one") {
  const std::vector<int64_t> h = sampled_geom_hist(0.9, 20000, 202);
  const st::TestResult ok = st::geometric_gof(h, 0.1, 0.01);  // p = 1 - s
  REQUIRE(!ok.reject);
  const st::TestResult bad = st::geometric_gof(h, 0.13, 0.01);
  REQUIRE(bad.reject);
}

TEST_CASE("welch test separates shifted samples only") {
  rng::Stream g(7);
  std::vector<double> a, b, c;
  for (int i = 0; i < 4000; ++i) {
    a.push_back(g.next_open01());
    b.push_back(g.next_open01());
    c.push_back(g.next_open01() + 0.05);
  }
  REQUIRE(!st::welch_t_test(a, b, 0.01).reject);
  REQUIRE(st::welch_t_test(a, c, 0.01).reject);
}

TEST_CASE("linear fit recovers exact and noisy lines") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v - 2.0);
  const st::LinearFit exact = st::linear_fit(x, y);
  REQUIRE(exact.slope == Catch::Approx(3.0).epsilon(1e-12));
  REQUIRE(exact.intercept == Catch::Approx(-2.0).epsilon(1e-12));
  REQUIRE(exact.r2 == Catch::Approx(1.0).epsilon(1e-12));

  rng::Stream g(9);
  std::vector<double> xs, ys;
  for (int i = 0; i < 400; ++i) {
    const double v = static_cast<double>(i) / 40.0;
    xs.push_back(v);
    ys.push_back(1.5 * v + 0.5 + (g.next_open01() - 0.5));
  }
  const st::LinearFit f = st::linear_fit(xs, ys);
  REQUIRE(std::abs(f.slope - 1.5) < 4.0 * f.slope_stderr);
  REQUIRE(f.slope_p < 1e-10);
}

TEST_CASE("grid hausdorff distance on known masks") {
  const BoxIndexer g(Box{Site{}, 4}, 3);
  std::vector<uint8_t> a(static_cast<size_t>(g.size), 0);
  std::vector<uint8_t> b(static_cast<size_t>(g.size), 0);
  a[static_cast<size_t>(g.index(make_site({0, 0, 0})))] = 1;
  b[static_cast<size_t>(g.index(make_site({2, -1, 0})))] = 1;
  REQUIRE(st::hausdorff_grid(a, b, g) == 2);  // l-infinity metric
  // A set against itself.
  REQUIRE(st::hausdorff_grid(a, a, g) == 0);
  // Superset: directed distances differ, max picks the larger.
  std::vector<uint8_t> c = a;
  c[static_cast<size_t>(g.index(make_site({-3, 0, 0})))] = 1;
  REQUIRE(st::hausdorff_grid(a, c, g) == 3);
}

TEST_CASE("grid symmetry score is 1 for symmetric masks") {
  const BoxIndexer g(Box{Site{}, 3}, 3);
  std::vector<uint8_t> ball(static_cast<size_t>(g.size), 0);
  for (int64_t i = 0; i < g.size; ++i) {
    const Site s = g.site(i);
    if (std::abs(s[0]) + std::abs(s[1]) + std::abs(s[2]) <= 2)
      ball[static_cast<size_t>(i)] = 1;
  }
  REQUIRE(st::symmetry_score_grid(ball, g) == Catch::Approx(1.0));
  // Breaking the symmetry lowers the score.
  std::vector<uint8_t> skew = ball;
  for (int64_t i = 0; i < g.size; ++i) {
    const Site s = g.site(i);
    if (s[0] == 3) skew[static_cast<size_t>(i)] = 1;
  }
  REQUIRE(st::symmetry_score_grid(skew, g) < 0.9);
}

// ---------------------------------------------------------------------------
// Convexity deficit.

TEST_CASE("convexity deficit on known polytopes") {
  // The 8 corners of [0,3]^3: hull holds 64 lattice points.
  std::vector<Site> cube;
  for (int x : {0, 3})
    for (int y : {0, 3})
      for (int z : {0, 3}) cube.push_back(make_site({x, y, z}));
  REQUIRE(st::convexity_deficit(cube, 3) == Catch::Approx(1.0 - 8.0 / 64.0));

  // The full solid cube is convex.
  std::vector<Site> solid;
  for (int x = 0; x <= 3; ++x)
    for (int y = 0; y <= 3; ++y)
      for (int z = 0; z <= 3; ++z) solid.push_back(make_site({x, y, z}));
  REQUIRE(st::convexity_deficit(solid, 3) == Catch::Approx(0.0));

  // Tetrahedron (0,0,0),(2,0,0),(0,2,0),(0,0,2): 10 lattice points inside.
  const std::vector<Site> tet{make_site({0, 0, 0}), make_site({2, 0, 0}),
                              make_site({0, 2, 0}), make_site({0, 0, 2})};
  REQUIRE(st::convexity_deficit(tet, 3) == Catch::Approx(1.0 - 4.0 / 10.0));

  // Octahedron |x|+|y|+|z| <= 2 has 25 lattice points; its 6 vertices alone.
  std::vector<Site> oct;
  for (int dir = 0; dir < 6; ++dir) {
    const int ax = direction_axis(dir);
    const int dl = direction_delta(dir);
    oct.push_back(offset_site(offset_site(Site{}, ax, dl), ax, dl));
  }
  REQUIRE(st::convexity_deficit(oct, 3) == Catch::Approx(1.0 - 6.0 / 25.0));

  // Degenerate ranks: point, segment, planar square.
  REQUIRE(st::convexity_deficit({make_site({5, -7, 2})}, 3) == 0.0);
  REQUIRE(st::convexity_deficit({make_site({0, 0, 0}), make_site({3, 3, 3})},
                                3) == Catch::Approx(0.5));
  const std::vector<Site> square{make_site({0, 0, 0}), make_site({2, 0, 0}),
                                 make_site({0, 2, 0}), make_site({2, 2, 0})};
  REQUIRE(st::convexity_deficit(square, 3) == Catch::Approx(1.0 - 4.0 / 9.0));

  // Only d=3 is supported; other dimensions report NaN.
  REQUIRE(std::isnan(st::convexity_deficit(cube, 4)));
  REQUIRE_THROWS_AS(st::convexity_deficit({}, 3), std::invalid_argument);
}

namespace {

// Independent convex-hull membership oracle via Caratheodory: q lies in
// conv(S) iff it lies in some simplex spanned by <= 4 points of S.  All
// predicates are exact integer arithmetic.
using I128 = __int128;

I128 det3(const std::array<int64_t, 3>& a, const std::array<int64_t, 3>& b,
          const std::array<int64_t, 3>& c) {
  return I128(a[0]) * (I128(b[1]) * c[2] - I128(b[2]) * c[1]) -
         I128(a[1]) * (I128(b[0]) * c[2] - I128(b[2]) * c[0]) +
         I128(a[2]) * (I128(b[0]) * c[1] - I128(b[1]) * c[0]);
}

std::array<int64_t, 3> sub(const Site& p, const Site& q) {
  return {int64_t{p[0]} - q[0], int64_t{p[1]} - q[1], int64_t{p[2]} - q[2]};
}

bool in_tetra(const Site& q, const Site& a, const Site& b, const Site& c,
              const Site& d) {
  const I128 vol = det3(sub(b, a), sub(c, a), sub(d, a));
  if (vol == 0) return false;
  // Barycentric signs: q is inside iff all sub-tetra volumes share vol's sign.
  const I128 wa = det3(sub(b, q), sub(c, q), sub(d, q));
  const I128 wb = det3(sub(q, a), sub(c, a), sub(d, a));
  const I128 wc = det3(sub(b, a), sub(q, a), sub(d, a));
  const I128 wd = det3(sub(b, a), sub(c, a), sub(q, a));
  const auto same = [&](I128 w) {
    return vol > 0 ? w >= 0 : w <= 0;
  };
  return same(wa) && same(wb) && same(wc) && same(wd);
}

bool in_hull_brute(const Site& q, const std::vector<Site>& s) {
  const size_t n = s.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      for (size_t k = j + 1; k < n; ++k)
        for (size_t l = k + 1; l < n; ++l)
          if (in_tetra(q, s[i], s[j], s[k], s[l])) return true;
  return false;
}

}  // namespace

TEST_CASE("convexity deficit matches a caratheodory brute oracle") {
  rng::Stream g(404);
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<Site> pts;
    const int m = 4 + static_cast<int>(g.next_below(7));
    for (int i = 0; i < m; ++i)
      pts.push_back(make_site({static_cast<int32_t>(g.next_below(9)) - 4,
                               static_cast<int32_t>(g.next_below(9)) - 4,
                               static_cast<int32_t>(g.next_below(9)) - 4}));
    const double got = st::convexity_deficit(pts, 3);
    // Oracle: count lattice points of the hull by scanning the bounding box.
    // Requires full affine rank; skip degenerate draws (rare at this size).
    bool degenerate = true;
    for (size_t i = 1; i < pts.size() && degenerate; ++i)
      for (size_t j = i + 1; j < pts.size() && degenerate; ++j)
        for (size_t k = j + 1; k < pts.size() && degenerate; ++k)
          if (det3(sub(pts[i], pts[0]), sub(pts[j], pts[0]),
                   sub(pts[k], pts[0])) != 0)
            degenerate = false;
    if (degenerate) continue;
    int64_t total = 0, members = 0;
    std::vector<Site> uniq = pts;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (int32_t x = -4; x <= 4; ++x)
      for (int32_t y = -4; y <= 4; ++y)
        for (int32_t z = -4; z <= 4; ++z) {
          const Site q = make_site({x, y, z});
          if (in_hull_brute(q, pts)) ++total;
        }
    members = static_cast<int64_t>(uniq.size());
    const double want =
        1.0 - static_cast<double>(members) / static_cast<double>(total);
    REQUIRE(got == Catch::Approx(want).margin(1e-12));
  }
}
