#pragma once
// Exact lattice potential theory for the simple random walk on Z^d, with the
// geometric killing expressed through the generating-function variable
// s = T/(T+1) (s = 1 is the unkilled walk, d >= 3 transient).
//
// The Green's function G_s(x) = sum_j s^j P_0(X_j = x) is evaluated through
// its exponential-time representation.  Writing 1/(1 - s*phi(theta)) =
// integral_0^inf exp(-t (1 - s*phi)) dt inside the Fourier inversion and
// factorizing the theta integral per axis gives the exact identity
//
//   G_s(x) = integral_0^inf  e^{-(1-s) t}  prod_i  Itilde_{|x_i|}(s t / d) dt,
//
// where Itilde_n(z) = e^{-z} I_n(z) is the scaled modified Bessel function
// (all factors lie in (0, 1], so the integrand is positive and smooth --
// no oscillation and no cancellation in any dimension).  The integral is
// computed in y = ln t by fixed-width Gauss-Legendre panels, with analytic
// bounds for the truncated head (Itilde <= 1) and tail
// (Itilde_0(z) <= 1.3 / sqrt(2 pi z)).  Scaled Bessel values come from the
// Miller backward recurrence normalized by Itilde_0 + 2 sum Itilde_n = 1
// for moderate z, and from the 1/z asymptotic series for large z.
//
// Capacities: cap_s(K) solves the equilibrium system
//   sum_{y in K} G_s(x - y) w(y) = 1   for all x in K,
// whose solution w is the (killed) equilibrium measure and sum w the
// capacity.  For s = 1 the measure is supported on the internal boundary of
// a solid box, so ball capacities reduce to a boundary system.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/stats.hpp"

namespace fri {

// Canonical form of an offset under the lattice symmetries: coordinates
// replaced by absolute values and sorted descending.
inline Site canonical_offset(const Site& x, int d) {
  Site c;
  for (int i = 0; i < d; ++i) c[i] = std::abs(x[i]);
  std::sort(c.c.begin(), c.c.begin() + d, std::greater<int32_t>());
  return c;
}

namespace detail {

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr double kGlNodes16[16] = {
    -0.98940093499164993, -0.94457502307323258, -0.86563120238783176,
    -0.75540440835500303, -0.61787624440264375, -0.45801677765722739,
    -0.28160355077925891, -0.09501250983763744, 0.09501250983763744,
    0.28160355077925891,  0.45801677765722739,  0.61787624440264375,
    0.75540440835500303,  0.86563120238783176,  0.94457502307323258,
    0.98940093499164993};
inline constexpr double kGlWeights16[16] = {
    0.02715245941175409, 0.06225352393864789, 0.09515851168249278,
    0.12462897125553387, 0.14959598881657673, 0.16915651939500254,
    0.18260341504492359, 0.18945061045506850, 0.18945061045506850,
    0.18260341504492359, 0.16915651939500254, 0.14959598881657673,
    0.12462897125553387, 0.09515851168249278, 0.06225352393864789,
    0.02715245941175409};

// Scaled modified Bessel values Itilde_n(z) = e^{-z} I_n(z), n = 0..n_max,
// z > 0.  Moderate z: Miller backward recurrence with the normalization
// Itilde_0 + 2 sum_{n>=1} Itilde_n = 1 (e^z = I_0 + 2 sum I_n).  Large z:
// asymptotic series I_n(z) ~ e^z/sqrt(2 pi z) * sum_k (-1)^k a_k(mu)/(8z)^k
// with mu = 4 n^2, whose terms at z >= 1e6 and n <= 512 shrink by < 1e-2
// per order.
inline void bessel_scaled(double z, int n_max, double* out) {
  constexpr double kSeriesZ = 1e6;
  if (z >= kSeriesZ) {
    const double base = 1.0 / std::sqrt(2.0 * 3.14159265358979323846 * z);
    for (int n = 0; n <= n_max; ++n) {
      const double mu = 4.0 * static_cast<double>(n) * n;
      double term = 1.0, sum = 1.0;
      for (int k = 1; k <= 30; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (8.0 * z * k);
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
      }
      out[n] = base * sum;
    }
    return;
  }
  // Start order: I_nu(z)/I_0(z) ~ exp(-nu^2 / 2z) below the turning point,
  // so nu = sqrt(84 z) gives a ratio < 1e-18; add slack for small z.
  const int start = n_max + 24 + static_cast<int>(std::ceil(9.2 * std::sqrt(z)));
  double fp = 0.0;          // f_{nu+1}
  double fc = 1e-280;       // f_nu
  double side = 0.0;        // sum of f_n over n in [1, start]
  for (int n = 0; n <= n_max; ++n) out[n] = 0.0;
  for (int nu = start; nu >= 1; --nu) {
    const double fm = fp + (2.0 * nu / z) * fc;  // f_{nu-1}
    fp = fc;
    fc = fm;
    if (nu - 1 <= n_max) out[nu - 1] = fc;
    if (nu - 1 >= 1) side += fc;
    if (fc > 1e250) {
      fp *= 1e-250;
      fc *= 1e-250;
      side *= 1e-250;
      for (int n = 0; n <= n_max; ++n) out[n] *= 1e-250;
    }
  }
  const double total = fc + 2.0 * side;  // fc = unnormalized f_0
  for (int n = 0; n <= n_max; ++n) out[n] /= total;
}

}  // namespace detail

// Batched Green's function evaluation: values of G_s at the given offsets,
// each within absolute `tol`.  Offsets are canonicalized internally.
inline std::vector<double> green_batch(int d, double s, double tol,
                                       const std::vector<Site>& offsets) {
  validate_dim(d);
  if (!(s > 0.0) || s > 1.0)
    throw std::invalid_argument("green: s must be in (0, 1]");
  if (!(tol > 0.0) || tol > 1e-2)
    throw std::invalid_argument("green: tol must be in (0, 1e-2]");

  std::vector<Site> canon(offsets.size());
  int n_max = 0;
  for (size_t i = 0; i < offsets.size(); ++i) {
    canon[i] = canonical_offset(offsets[i], d);
    n_max = std::max(n_max, static_cast<int>(canon[i][0]));
  }
  if (n_max > 512)
    throw std::invalid_argument("green: offset coordinate exceeds 512");

  const double pi = 3.14159265358979323846;
  // Head: the integrand is at most e^{-(1-s)t} <= 1, so (0, t_min]
  // contributes at most t_min.
  const double t_min = 0.25 * tol;
  // Tail: Itilde_n(z) <= Itilde_0(z) <= 1.3 / sqrt(2 pi z) for z >= 1, so
  // for t >= M the integrand is at most A t^{-d/2} e^{-(1-s)M} with
  // A = (1.3)^d (2 pi s / d)^{-d/2}, and the tail integral is bounded by
  // A e^{-(1-s)M} M^{1-d/2} / (d/2 - 1).
  const double a_tail =
      std::pow(1.3, d) * std::pow(2.0 * pi * s / static_cast<double>(d),
                                  -0.5 * static_cast<double>(d));
  double t_max = std::max(2.0 * static_cast<double>(d) / s, 16.0);
  for (int iter = 0; iter < 400; ++iter) {
    const double bound = a_tail * std::exp(-(1.0 - s) * t_max) *
                         std::pow(t_max, 1.0 - 0.5 * d) / (0.5 * d - 1.0);
    if (bound <= 0.25 * tol) break;
    t_max *= 2.0;
    if (iter == 399)
      throw std::runtime_error("green: tail truncation did not converge");
  }

  // Gauss-Legendre panels in y = ln t; the integrand t * e^{-(1-s)t} *
  // prod Itilde is smooth and positive, and a fixed sub-half-unit panel
  // width resolves it far below the truncation budget.
  const double y_lo = std::log(t_min), y_hi = std::log(t_max);
  const double target_width = tol >= 1e-9 ? 0.5 : 0.3;
  const int panels =
      std::max(1, static_cast<int>(std::ceil((y_hi - y_lo) / target_width)));
  const double width = (y_hi - y_lo) / panels;

  std::vector<double> acc(offsets.size(), 0.0);
  std::vector<double> bess(static_cast<size_t>(n_max) + 1);
  for (int p = 0; p < panels; ++p) {
    const double mid = y_lo + width * (p + 0.5), half = 0.5 * width;
    for (int j = 0; j < 16; ++j) {
      const double y = mid + half * detail::kGlNodes16[j];
      const double t = std::exp(y);
      const double z = s * t / static_cast<double>(d);
      detail::bessel_scaled(z, n_max, bess.data());
      // Jacobian dt = t dy folded into the node weight.
      const double base = half * detail::kGlWeights16[j] * t *
                          std::exp(-(1.0 - s) * t);
      for (size_t o = 0; o < canon.size(); ++o) {
        double prod = base;
        for (int i = 0; i < d; ++i)
          prod *= bess[static_cast<size_t>(canon[o][i])];
        acc[o] += prod;
      }
    }
  }
  return acc;
}

// Cached single-offset evaluation (process-wide cache keyed by d, s, tol).
inline double green(int d, double s, double tol, const Site& offset) {
  struct Key {
    int d;
    uint64_t s_bits, tol_bits;
    std::array<int32_t, kMaxDim> c;
    bool operator<(const Key& o) const {
      return std::tie(d, s_bits, tol_bits, c) <
             std::tie(o.d, o.s_bits, o.tol_bits, o.c);
    }
  };
  static std::map<Key, double> cache;
  static std::mutex mu;
  const Site canon = canonical_offset(offset, d);
  Key k{d, 0, 0, canon.c};
  std::memcpy(&k.s_bits, &s, sizeof s);
  std::memcpy(&k.tol_bits, &tol, sizeof tol);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
  }
  const double v = green_batch(d, s, tol, {canon})[0];
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(k, v);
  return v;
}

// ---------------------------------------------------------------------------
// Equilibrium systems and capacities.

struct Equilibrium {
  std::vector<Site> sites;
  std::vector<double> weights;  // equilibrium measure, nonnegative
  double capacity = 0.0;        // sum of weights
  double rcond = 0.0;           // reciprocal condition estimate of the system
};

inline Equilibrium equilibrium_solve(const std::vector<Site>& k_set, int d,
                                     double s, double tol = 1e-8) {
  validate_dim(d);
  if (k_set.empty()) throw std::invalid_argument("equilibrium: empty set");
  if (k_set.size() > 4096)
    throw std::invalid_argument("equilibrium: set larger than 4096 sites");
  for (size_t i = 0; i < k_set.size(); ++i)
    for (size_t j = i + 1; j < k_set.size(); ++j)
      if (k_set[i] == k_set[j])
        throw std::invalid_argument("equilibrium: duplicate sites");

  // Distinct canonical offsets, then one batched quadrature pass.
  std::map<std::array<int32_t, kMaxDim>, double> values;
  for (size_t i = 0; i < k_set.size(); ++i)
    for (size_t j = 0; j < k_set.size(); ++j) {
      Site diff;
      for (int a = 0; a < d; ++a) diff[a] = k_set[i][a] - k_set[j][a];
      values.emplace(canonical_offset(diff, d).c, 0.0);
    }
  std::vector<Site> offsets;
  offsets.reserve(values.size());
  for (const auto& [c, v] : values) {
    Site x;
    x.c = c;
    offsets.push_back(x);
  }
  const std::vector<double> gv = green_batch(d, s, tol, offsets);
  for (size_t i = 0; i < offsets.size(); ++i) values[offsets[i].c] = gv[i];

  const int n = static_cast<int>(k_set.size());
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Site diff;
      for (int a = 0; a < d; ++a)
        diff[a] = k_set[static_cast<size_t>(i)][a] -
                  k_set[static_cast<size_t>(j)][a];
      m(i, j) = values[canonical_offset(diff, d).c];
    }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::VectorXd w = lu.solve(Eigen::VectorXd::Ones(n));

  Equilibrium eq;
  eq.sites = k_set;
  eq.weights.resize(static_cast<size_t>(n));
  eq.rcond = lu.rcond();
  for (int i = 0; i < n; ++i) {
    eq.weights[static_cast<size_t>(i)] = w(i);
    eq.capacity += w(i);
  }
  return eq;
}

// Unkilled capacity of the solid box B(R): the s = 1 equilibrium measure of
// a solid set lives on its internal boundary (an interior site's first step
// stays inside, so its escape probability is zero), which keeps the linear
// system at boundary size.
inline Equilibrium ball_capacity(int d, int32_t radius, double tol = 1e-8) {
  if (radius < 0) throw std::invalid_argument("ball_capacity: radius < 0");
  if (radius == 0) return equilibrium_solve({Site{}}, d, 1.0, tol);
  return equilibrium_solve(internal_boundary(Box{Site{}, radius}, d), d, 1.0,
                           tol);
}

struct CapacityScaling {
  std::vector<int32_t> radii;
  std::vector<double> capacities;
  stats::LinearFit fit;  // log capacity vs log radius
};

inline CapacityScaling ball_capacity_scaling(int d,
                                             const std::vector<int32_t>& radii,
                                             double tol = 1e-8) {
  if (radii.size() < 3)
    throw std::invalid_argument("capacity scaling: need >= 3 radii");
  CapacityScaling out;
  out.radii = radii;
  std::vector<double> lx, ly;
  for (int32_t r : radii) {
    if (r < 1) throw std::invalid_argument("capacity scaling: radius < 1");
    const double c = ball_capacity(d, r, tol).capacity;
    out.capacities.push_back(c);
    lx.push_back(std::log(static_cast<double>(r)));
    ly.push_back(std::log(c));
  }
  out.fit = stats::linear_fit(lx, ly);
  return out;
}

// ---------------------------------------------------------------------------
// Monte-carlo cross-check of short-horizon hitting rates: a plain walk from
// a uniform start on the annulus B(outer sqrt T) \ B(inner sqrt T) hits
// A = B(r) within T steps with probability comparable to T^((2-d)/2) cap(A);
// the useful invariant is that the ratio across different A is the capacity
// ratio, up to sampling error.  The default annulus factors 6/8 put the
// starts so far out that the hit probability is below ~e^-30 (unmeasurable
// by direct simulation); callers that want observable rates pass smaller
// factors, which preserve the capacity-proportionality being tested.

struct HitRateResult {
  int32_t a_radius = 0;
  double p_hat = 0.0;
  double stderr_p = 0.0;
  double capacity = 0.0;
  double ratio = 0.0;  // p_hat / (T^((2-d)/2) * capacity)
};

inline std::vector<HitRateResult> hit_rate_check(
    int d, double T, const std::vector<int32_t>& a_radii, int64_t replicas,
    uint64_t seed, double tol = 1e-8, double inner_factor = 6.0,
    double outer_factor = 8.0) {
  validate_dim(d);
  if (!(T > 1.0)) throw std::invalid_argument("hit_rate_check: T must be > 1");
  if (replicas < 100)
    throw std::invalid_argument("hit_rate_check: need >= 100 replicas");
  if (!(inner_factor > 0.0) || !(outer_factor > inner_factor))
    throw std::invalid_argument("hit_rate_check: bad annulus factors");
  const double rt = std::sqrt(T);
  const int32_t r_out = static_cast<int32_t>(std::floor(outer_factor * rt));
  const int32_t r_in = static_cast<int32_t>(std::floor(inner_factor * rt));
  const int64_t horizon = static_cast<int64_t>(std::ceil(T)) - 1;
  std::vector<HitRateResult> out;
  for (size_t ai = 0; ai < a_radii.size(); ++ai) {
    const int32_t ra = a_radii[ai];
    if (ra > static_cast<int32_t>(std::floor(1.5 * rt)))
      throw std::invalid_argument("hit_rate_check: A exceeds B(1.5 sqrt T)");
    if (ra >= r_in)
      throw std::invalid_argument("hit_rate_check: annulus overlaps A");
    int64_t hits = 0;
    for (int64_t rep = 0; rep < replicas; ++rep) {
      rng::Stream g(rng::derive(seed, rng::tag_mc, ai, static_cast<uint64_t>(rep)));
      // Uniform start on the annulus by rejection from the outer box.
      Site y{};
      for (;;) {
        int32_t m = 0;
        for (int i = 0; i < d; ++i) {
          y[i] = static_cast<int32_t>(
                     g.next_below(static_cast<uint32_t>(2 * r_out + 1))) -
                 r_out;
          m = std::max(m, std::abs(y[i]));
        }
        if (m > r_in) break;
      }
      for (int64_t step = 0; step < horizon; ++step) {
        const int dir =
            static_cast<int>(g.next_below(static_cast<uint32_t>(2 * d)));
        y[direction_axis(dir)] += direction_delta(dir);
        int32_t m = 0;
        for (int i = 0; i < d; ++i) m = std::max(m, std::abs(y[i]));
        if (m <= ra) {
          ++hits;
          break;
        }
      }
    }
    HitRateResult r;
    r.a_radius = ra;
    r.p_hat = static_cast<double>(hits) / static_cast<double>(replicas);
    r.stderr_p = std::sqrt(r.p_hat * (1.0 - r.p_hat) /
                           static_cast<double>(replicas));
    r.capacity = ball_capacity(d, ra, tol).capacity;
    r.ratio = r.p_hat / (std::pow(T, 0.5 * (2 - d)) * r.capacity);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tabulated Green values with a plain-text interchange format:
//
//   green-table v1
//   d 3
//   s 0.99009900990099009
//   tol 1e-08
//   entries 2
//   0 0 0 1.5163860591519780
//   1 0 0 0.25819403523489224
//
// Offsets are canonical (absolute values, sorted descending), one per line,
// d coordinates then the value.

struct GreenTable {
  int d = 3;
  double s = 1.0;
  double tol = 1e-8;
  std::vector<std::pair<Site, double>> entries;  // sorted by canonical offset
};

// Every canonical offset with coordinates at most max_coord.
inline GreenTable build_green_table(int d, double s, double tol,
                                    int32_t max_coord) {
  validate_dim(d);
  if (max_coord < 0 || max_coord > 32)
    throw std::invalid_argument("green table: max_coord out of range");
  GreenTable t;
  t.d = d;
  t.s = s;
  t.tol = tol;
  std::vector<Site> offsets;
  // Odometer over nonincreasing coordinate tuples.
  std::array<int32_t, kMaxDim> v{};
  for (;;) {
    Site site;
    bool ok = true;
    for (int i = 0; i + 1 < d; ++i)
      ok = ok && v[static_cast<size_t>(i)] >= v[static_cast<size_t>(i + 1)];
    if (ok) {
      for (int i = 0; i < d; ++i) site[i] = v[static_cast<size_t>(i)];
      offsets.push_back(site);
    }
    int axis = d - 1;
    while (axis >= 0 && ++v[static_cast<size_t>(axis)] > max_coord) {
      v[static_cast<size_t>(axis)] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  std::sort(offsets.begin(), offsets.end());
  const std::vector<double> vals = green_batch(d, s, tol, offsets);
  for (size_t i = 0; i < offsets.size(); ++i)
    t.entries.emplace_back(offsets[i], vals[i]);
  return t;
}

inline void write_green_table(const GreenTable& t, std::ostream& os) {
  os << "green-table v1\n";
  os << "d " << t.d << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", t.s);
  os << "s " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", t.tol);
  os << "tol " << buf << "\n";
  os << "entries " << t.entries.size() << "\n";
  for (const auto& [site, value] : t.entries) {
    for (int i = 0; i < t.d; ++i) os << site[i] << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", value);
    os << buf << "\n";
  }
}

inline GreenTable read_green_table(std::istream& is) {
  GreenTable t;
  std::string line, word;
  if (!std::getline(is, line) || line != "green-table v1")
    throw std::runtime_error("green table: bad header");
  size_t count = 0;
  for (const char* key : {"d", "s", "tol", "entries"}) {
    if (!std::getline(is, line))
      throw std::runtime_error("green table: truncated header");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw std::runtime_error("green table: expected key " +
                                           std::string(key));
    if (k == "d")
      ls >> t.d;
    else if (k == "s")
      ls >> t.s;
    else if (k == "tol")
      ls >> t.tol;
    else
      ls >> count;
    if (!ls) throw std::runtime_error("green table: bad header value");
  }
  validate_dim(t.d);
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line))
      throw std::runtime_error("green table: truncated entries");
    std::istringstream ls(line);
    Site site{};
    for (int j = 0; j < t.d; ++j) ls >> site.c[static_cast<size_t>(j)];
    double value = 0.0;
    ls >> value;
    if (!ls) throw std::runtime_error("green table: bad entry line");
    t.entries.emplace_back(site, value);
  }
  for (size_t i = 1; i < t.entries.size(); ++i)
    if (!(t.entries[i - 1].first < t.entries[i].first))
      throw std::runtime_error("green table: entries not sorted");
  return t;
}

// Canonicalized lookup by binary search; throws when absent.
inline double green_lookup(const GreenTable& t, const Site& offset) {
  const Site c = canonical_offset(offset, t.d);
  auto it = std::lower_bound(
      t.entries.begin(), t.entries.end(), c,
      [](const std::pair<Site, double>& e, const Site& key) {
        return e.first < key;
      });
  if (it == t.entries.end() || !(it->first == c))
    throw std::out_of_range("green table: offset not tabulated");
  return it->second;
}

}  // namespace fri
