#pragma once
// Statistics used by the verification experiments: summary moments,
// chi-square goodness-of-fit against discrete laws, linear least squares,
// Wilson score intervals, Welch two-sample tests, and set geometry
// (l-infinity Hausdorff distance, lattice-symmetry score).
//
// Special functions (regularized incomplete gamma/beta) are implemented
// locally to double precision so that p-values are identical on every
// platform; <cmath> provides only lgamma/erfc of what is needed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fri/lattice.hpp"

namespace fri::stats {

inline constexpr double kDefaultSignificance = 0.01;
inline constexpr double kDefaultConfidence = 0.95;

// ---------------------------------------------------------------------------
// Summary moments.

struct SummaryStats {
  int64_t n = 0;
  double mean = 0.0;
  double var = 0.0;  // unbiased (n-1 denominator); 0 when n < 2
  double min = 0.0;
  double max = 0.0;
  double stderr_mean() const {
    return n > 1 ? std::sqrt(var / static_cast<double>(n)) : 0.0;
  }
};

inline SummaryStats summarize(const std::vector<double>& xs) {
  SummaryStats s;
  s.n = static_cast<int64_t>(xs.size());
  if (s.n == 0) return s;
  s.min = s.max = xs[0];
  double mean = 0.0;
  for (double x : xs) {
    mean += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  mean /= static_cast<double>(s.n);
  s.mean = mean;
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.var = ss / static_cast<double>(s.n - 1);
  }
  return s;
}

// Quantile with linear interpolation; q in [0,1].  Sorts a copy.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const size_t i = static_cast<size_t>(pos);
  if (i + 1 >= xs.size()) return xs.back();
  const double f = pos - static_cast<double>(i);
  return xs[i] * (1.0 - f) + xs[i + 1] * f;
}

// ---------------------------------------------------------------------------
// Special functions.

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series; requires x < a+1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by continued fraction; x >= a+1.
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Incomplete beta continued fraction (Lentz).
inline double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double dm = static_cast<double>(m);
    double aa = dm * (b - dm) * x / ((qam + 2.0 * dm) * (a + 2.0 * dm));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + dm) * (qab + dm) * x / ((a + 2.0 * dm) * (qap + 2.0 * dm));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return h;
}

}  // namespace detail

inline double regularized_gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_cf(a, x);
}

inline double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

// Regularized incomplete beta I_x(a,b).
inline double regularized_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("beta domain");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// Survival function of the chi-square distribution with df degrees.
inline double chi_square_sf(double x, int df) {
  if (df <= 0) throw std::invalid_argument("chi_square_sf: df must be > 0");
  if (x <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * df, 0.5 * x);
}

// Two-sided survival of Student's t: P(|T_df| >= t).
inline double student_t_two_sided(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("student_t: df must be > 0");
  const double x = df / (df + t * t);
  return regularized_beta(0.5 * df, 0.5, x);
}

// Standard normal quantile (Acklam's rational approximation, |err| < 1.2e-9).
inline double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("normal_quantile");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  if (p > phigh) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// ---------------------------------------------------------------------------
// Hypothesis tests.

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double significance = kDefaultSignificance;
  int df = 0;
  bool reject = false;  // p_value < significance
};

namespace detail {

// Bin a sample histogram against a discrete pmf, merging adjacent bins from
// the low end until each expected count is >= 5; the final bin absorbs the
// entire upper tail.  hist[k] counts observations equal to k.
struct BinnedGof {
  std::vector<double> expected;
  std::vector<int64_t> observed;
};

inline BinnedGof bin_histogram(const std::vector<int64_t>& hist,
                               const std::function<double(int64_t)>& pmf,
                               int64_t total) {
  BinnedGof out;
  const double tn = static_cast<double>(total);
  double acc_e = 0.0;
  int64_t acc_o = 0;
  double cum_p = 0.0;
  const int64_t kmax = static_cast<int64_t>(hist.size());
  for (int64_t k = 0; k < kmax; ++k) {
    const double pk = pmf(k);
    cum_p += pk;
    acc_e += tn * pk;
    acc_o += hist[static_cast<size_t>(k)];
    if (acc_e >= 5.0) {
      out.expected.push_back(acc_e);
      out.observed.push_back(acc_o);
      acc_e = 0.0;
      acc_o = 0;
    }
  }
  // Upper tail: everything at k >= kmax has observed 0 by construction.
  acc_e += tn * std::max(0.0, 1.0 - cum_p);
  if (out.expected.empty() || acc_e >= 5.0 || acc_o > 0) {
    out.expected.push_back(acc_e);
    out.observed.push_back(acc_o);
  } else {
    out.expected.back() += acc_e;
    out.observed.back() += acc_o;
  }
  // Ensure the closing bin also meets the threshold.
  while (out.expected.size() > 1 && out.expected.back() < 5.0) {
    out.expected[out.expected.size() - 2] += out.expected.back();
    out.observed[out.observed.size() - 2] += out.observed.back();
    out.expected.pop_back();
    out.observed.pop_back();
  }
  return out;
}

inline TestResult chi_square_from_bins(const BinnedGof& b,
                                       double significance) {
  if (b.expected.size() < 2)
    throw std::invalid_argument("goodness-of-fit needs >= 2 bins; "
                                "sample too small for the given law");
  TestResult r;
  r.significance = significance;
  double stat = 0.0;
  for (size_t i = 0; i < b.expected.size(); ++i) {
    const double diff = static_cast<double>(b.observed[i]) - b.expected[i];
    stat += diff * diff / b.expected[i];
  }
  r.statistic = stat;
  r.df = static_cast<int>(b.expected.size()) - 1;
  r.p_value = chi_square_sf(stat, r.df);
  r.reject = r.p_value < significance;
  return r;
}

}  // namespace detail

// Chi-square GOF of a count histogram against Poisson(lambda).  hist[k] is
// the number of observations equal to k; the total must be >= 50.
inline TestResult poisson_gof(const std::vector<int64_t>& hist, double lambda,
                              double significance = kDefaultSignificance) {
  if (lambda <= 0.0) throw std::invalid_argument("poisson_gof: lambda <= 0");
  int64_t total = 0;
  for (int64_t c : hist) {
    if (c < 0) throw std::invalid_argument("poisson_gof: negative count");
    total += c;
  }
  if (total < 50)
    throw std::invalid_argument("poisson_gof: need >= 50 observations");
  const double loglam = std::log(lambda);
  auto pmf = [lambda, loglam](int64_t k) {
    return std::exp(-lambda + static_cast<double>(k) * loglam -
                    std::lgamma(static_cast<double>(k) + 1.0));
  };
  return detail::chi_square_from_bins(
      detail::bin_histogram(hist, pmf, total), significance);
}

// Chi-square GOF against Geometric on {0,1,...} with success probability p:
// P(K=k) = p (1-p)^k.
inline TestResult geometric_gof(const std::vector<int64_t>& hist, double p,
                                double significance = kDefaultSignificance) {
  if (p <= 0.0 || p > 1.0) throw std::invalid_argument("geometric_gof: p");
  int64_t total = 0;
  for (int64_t c : hist) {
    if (c < 0) throw std::invalid_argument("geometric_gof: negative count");
    total += c;
  }
  if (total < 50)
    throw std::invalid_argument("geometric_gof: need >= 50 observations");
  const double log1mp = std::log1p(-p);
  auto pmf = [p, log1mp](int64_t k) {
    return p * std::exp(static_cast<double>(k) * log1mp);
  };
  return detail::chi_square_from_bins(
      detail::bin_histogram(hist, pmf, total), significance);
}

// Welch's unequal-variance t-test for equality of means; two-sided p-value
// from Student's t with Welch-Satterthwaite degrees of freedom.
inline TestResult welch_t_test(const std::vector<double>& a,
                               const std::vector<double>& b,
                               double significance = kDefaultSignificance) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("welch_t_test: need >= 2 samples per arm");
  const SummaryStats sa = summarize(a), sb = summarize(b);
  const double va = sa.var / static_cast<double>(sa.n);
  const double vb = sb.var / static_cast<double>(sb.n);
  TestResult r;
  r.significance = significance;
  if (va + vb == 0.0) {
    r.statistic = sa.mean == sb.mean ? 0.0
                                     : std::numeric_limits<double>::infinity();
    r.p_value = sa.mean == sb.mean ? 1.0 : 0.0;
    r.reject = r.p_value < significance;
    return r;
  }
  r.statistic = (sa.mean - sb.mean) / std::sqrt(va + vb);
  const double df =
      (va + vb) * (va + vb) /
      (va * va / static_cast<double>(sa.n - 1) +
       vb * vb / static_cast<double>(sb.n - 1));
  r.df = static_cast<int>(df);
  r.p_value = student_t_two_sided(r.statistic, df);
  r.reject = r.p_value < significance;
  return r;
}

// ---------------------------------------------------------------------------
// Intervals and fits.

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(int64_t successes, int64_t trials,
                                double confidence = kDefaultConfidence) {
  if (trials <= 0) throw std::invalid_argument("wilson_interval: trials <= 0");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("wilson_interval: bad successes");
  const double z = normal_quantile(0.5 + 0.5 * confidence);
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (ph + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
  // Clamp so the interval always contains the point estimate; without this,
  // rounding can leave a ~1e-19 residue above 0 when successes == 0.
  return {std::max(0.0, std::min(center - half, ph)),
          std::min(1.0, std::max(center + half, ph))};
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
  double slope_p = 1.0;  // two-sided, H0: slope == 0
  int64_t n = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("linear_fit: size mismatch");
  if (x.size() < 3) throw std::invalid_argument("linear_fit: need >= 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate x");
  LinearFit f;
  f.n = static_cast<int64_t>(x.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double ss_res = std::max(0.0, syy - f.slope * sxy);
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  const double dfree = n - 2.0;
  const double s2 = ss_res / dfree;
  f.slope_stderr = std::sqrt(s2 / sxx);
  if (f.slope_stderr > 0.0)
    f.slope_p = student_t_two_sided(f.slope / f.slope_stderr, dfree);
  else
    f.slope_p = f.slope == 0.0 ? 1.0 : 0.0;
  return f;
}

// ---------------------------------------------------------------------------
// Set geometry: l-infinity Hausdorff distance and lattice symmetry.

using RealPoint = std::array<double, kMaxDim>;

inline double linf_real(const RealPoint& a, const RealPoint& b, int d) {
  double m = 0.0;
  for (int i = 0; i < d; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Exact O(|A||B|) Hausdorff distance; meant for small/medium sets.  The
// experiments use the grid variants below on large chemical balls.
inline double hausdorff(const std::vector<RealPoint>& a,
                        const std::vector<RealPoint>& b, int d) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("hausdorff of empty set");
  double h = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) best = std::min(best, linf_real(p, q, d));
    h = std::max(h, best);
  }
  for (const auto& q : b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : a) best = std::min(best, linf_real(p, q, d));
    h = std::max(h, best);
  }
  return h;
}

// l-infinity diameter of a set = max coordinate extent.
inline double diameter(const std::vector<RealPoint>& a, int d) {
  if (a.empty()) throw std::invalid_argument("diameter of empty set");
  double m = 0.0;
  for (int i = 0; i < d; ++i) {
    double lo = a[0][static_cast<size_t>(i)], hi = lo;
    for (const auto& p : a) {
      lo = std::min(lo, p[static_cast<size_t>(i)]);
      hi = std::max(hi, p[static_cast<size_t>(i)]);
    }
    m = std::max(m, hi - lo);
  }
  return m;
}

// The hyperoctahedral group (signed coordinate permutations), order 2^d d!.
// Elements map point p to q with q[i] = sign[i] * p[perm[i]].
struct SignedPerm {
  std::array<int8_t, kMaxDim> perm{};
  std::array<int8_t, kMaxDim> sign{};
};

inline std::vector<SignedPerm> hyperoctahedral_group(int d) {
  validate_dim(d);
  std::array<int8_t, kMaxDim> p{};
  for (int i = 0; i < d; ++i) p[static_cast<size_t>(i)] = static_cast<int8_t>(i);
  std::vector<SignedPerm> out;
  do {
    for (int mask = 0; mask < (1 << d); ++mask) {
      SignedPerm g;
      g.perm = p;
      for (int i = 0; i < d; ++i)
        g.sign[static_cast<size_t>(i)] = (mask >> i) & 1 ? -1 : 1;
      out.push_back(g);
    }
  } while (std::next_permutation(p.begin(), p.begin() + d));
  return out;
}

inline RealPoint apply_signed_perm(const SignedPerm& g, const RealPoint& p,
                                   int d) {
  RealPoint q{};
  for (int i = 0; i < d; ++i)
    q[static_cast<size_t>(i)] =
        g.sign[static_cast<size_t>(i)] *
        p[static_cast<size_t>(g.perm[static_cast<size_t>(i)])];
  return q;
}

// Symmetry score: 1 - H(A, sym(A)) / diam(A), clipped to [0,1], where sym(A)
// is the union of the hyperoctahedral orbit of A.  Since A is contained in
// sym(A), only the directed distances from each image gA to A contribute.
inline double symmetry_score(const std::vector<RealPoint>& a, int d) {
  if (a.empty()) throw std::invalid_argument("symmetry_score of empty set");
  const double diam = diameter(a, d);
  if (diam == 0.0) return 1.0;
  double h = 0.0;
  for (const SignedPerm& g : hyperoctahedral_group(d)) {
    for (const auto& p : a) {
      const RealPoint q = apply_signed_perm(g, p, d);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : a) best = std::min(best, linf_real(q, r, d));
      h = std::max(h, best);
      if (h >= diam) return 0.0;
    }
  }
  return std::max(0.0, 1.0 - h / diam);
}

// ---------------------------------------------------------------------------
// Grid variants used for large sets.  Masks are dense 0/1 byte arrays over a
// BoxIndexer grid.  Exact l-infinity lattice distances come from iterated
// unit-cube dilation (a separable in-place 3-window max per axis), stopping
// as soon as every query cell is covered, so the cost is proportional to the
// realized Hausdorff distance rather than the grid diameter.

namespace detail {

inline void dilate_axis(std::vector<uint8_t>& m, const BoxIndexer& g,
                        int axis) {
  const int64_t stride = g.stride[static_cast<size_t>(axis)];
  const int64_t extent = g.side;
  const int64_t block = extent * stride;
  for (int64_t b0 = 0; b0 < g.size; b0 += block) {
    for (int64_t off = 0; off < stride; ++off) {
      int64_t at = b0 + off;
      uint8_t prev = 0;
      uint8_t cur = m[static_cast<size_t>(at)];
      for (int64_t j = 0; j < extent; ++j) {
        const uint8_t next =
            j + 1 < extent ? m[static_cast<size_t>(at + stride)] : uint8_t{0};
        m[static_cast<size_t>(at)] = std::max({prev, cur, next});
        prev = cur;
        cur = next;
        at += stride;
      }
    }
  }
}

}  // namespace detail

// Directed Hausdorff sup_{a in A} dist(a, B) between masks on one grid.
// Returns cap+1 if some query cell is still uncovered after cap dilations.
inline int grid_directed_hausdorff(const std::vector<uint8_t>& query,
                                   const std::vector<uint8_t>& base,
                                   const BoxIndexer& g, int cap = 4096) {
  if (query.size() != static_cast<size_t>(g.size) || base.size() != query.size())
    throw std::invalid_argument("grid_directed_hausdorff: size mismatch");
  int64_t uncovered = 0;
  for (size_t i = 0; i < query.size(); ++i)
    if (query[i] && !base[i]) ++uncovered;
  if (uncovered == 0) return 0;
  bool base_any = false;
  for (uint8_t v : base) base_any |= v != 0;
  if (!base_any)
    throw std::invalid_argument("grid_directed_hausdorff: empty base mask");
  std::vector<uint8_t> cur(base);
  std::vector<uint8_t> seen(base);  // query cells already covered
  const int effective_cap =
      static_cast<int>(std::min<int64_t>(cap, 2 * (g.side - 1)));
  for (int r = 1; r <= effective_cap; ++r) {
    for (int axis = 0; axis < g.d; ++axis) detail::dilate_axis(cur, g, axis);
    for (size_t i = 0; i < query.size(); ++i) {
      if (query[i] && !seen[i] && cur[i]) {
        seen[i] = 1;
        if (--uncovered == 0) return r;
      }
    }
  }
  return effective_cap + 1;
}

inline int hausdorff_grid(const std::vector<uint8_t>& a,
                          const std::vector<uint8_t>& b, const BoxIndexer& g,
                          int cap = 4096) {
  return std::max(grid_directed_hausdorff(a, b, g, cap),
                  grid_directed_hausdorff(b, a, g, cap));
}

// Grid symmetry score about the grid center: 1 - H(sym(A), A) / diam(A)
// over the hyperoctahedral orbit sym(A).  The grid is an l-infinity ball
// around the symmetry center, so orbit images never leave it, and since
// A is a subset of sym(A) only the directed distance to A contributes.
inline double symmetry_score_grid(const std::vector<uint8_t>& mask,
                                  const BoxIndexer& g) {
  if (mask.size() != static_cast<size_t>(g.size))
    throw std::invalid_argument("symmetry_score_grid: size mismatch");
  const Site c = g.box.center;
  std::array<int32_t, kMaxDim> lo{}, hi{};
  for (int i = 0; i < g.d; ++i) {
    lo[static_cast<size_t>(i)] = std::numeric_limits<int32_t>::max();
    hi[static_cast<size_t>(i)] = std::numeric_limits<int32_t>::min();
  }
  int64_t npts = 0;
  std::vector<int64_t> cells;
  for (int64_t idx = 0; idx < g.size; ++idx) {
    if (!mask[static_cast<size_t>(idx)]) continue;
    ++npts;
    cells.push_back(idx);
    const Site s = g.site(idx);
    for (int i = 0; i < g.d; ++i) {
      lo[static_cast<size_t>(i)] = std::min(lo[static_cast<size_t>(i)], s[i]);
      hi[static_cast<size_t>(i)] = std::max(hi[static_cast<size_t>(i)], s[i]);
    }
  }
  if (npts == 0) throw std::invalid_argument("symmetry_score of empty mask");
  int32_t diam = 0;
  for (int i = 0; i < g.d; ++i)
    diam = std::max(diam,
                    hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]);
  if (diam == 0) return 1.0;

  std::vector<uint8_t> orbit(mask.size(), 0);
  for (const SignedPerm& sp : hyperoctahedral_group(g.d)) {
    for (int64_t idx : cells) {
      const Site s = g.site(idx);
      Site q = c;
      for (int i = 0; i < g.d; ++i) {
        const int pi = sp.perm[static_cast<size_t>(i)];
        q[i] = c[i] + sp.sign[static_cast<size_t>(i)] * (s[pi] - c[pi]);
      }
      orbit[static_cast<size_t>(g.index(q))] = 1;
    }
  }
  const int h = grid_directed_hausdorff(orbit, mask, g, diam + 1);
  return std::max(0.0,
                  1.0 - static_cast<double>(h) / static_cast<double>(diam));
}

// ---------------------------------------------------------------------------
// Convexity deficit: the fraction of lattice points of conv(S) that are
// missing from S.  Exact integer geometry (orientation tests in 128-bit),
// with affine-rank reduction for degenerate sets.  Dimension 3 only; other
// dimensions report NaN (the shape experiments that consume this run in
// d = 3).

namespace detail {

struct V3 {
  int64_t x = 0, y = 0, z = 0;
  bool operator==(const V3& o) const { return x == o.x && y == o.y && z == o.z; }
  bool operator<(const V3& o) const {
    return std::tie(x, y, z) < std::tie(o.x, o.y, o.z);
  }
};

inline V3 v3_sub(const V3& a, const V3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

inline V3 v3_cross(const V3& a, const V3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline __int128 v3_dot(const V3& a, const V3& b) {
  return static_cast<__int128>(a.x) * b.x + static_cast<__int128>(a.y) * b.y +
         static_cast<__int128>(a.z) * b.z;
}

// Sign of det[b-a, c-a, p-a]: positive when p lies on the side of plane
// (a,b,c) that the right-handed normal (b-a) x (c-a) points into.
inline int orient3d(const V3& a, const V3& b, const V3& c, const V3& p) {
  const V3 n = v3_cross(v3_sub(b, a), v3_sub(c, a));
  const __int128 v = v3_dot(n, v3_sub(p, a));
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

inline int64_t floor_div_i64(__int128 num, int64_t den) {
  __int128 q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return static_cast<int64_t>(q);
}

inline int64_t ceil_div_i64(__int128 num, int64_t den) {
  __int128 q = num / den;
  if ((num % den != 0) && ((num < 0) == (den < 0))) ++q;
  return static_cast<int64_t>(q);
}

// Triangular facets of conv(pts) for point sets of affine rank 3, by
// incremental insertion with exact orientation tests.  Facets wind so that
// the right-handed normal points outward.
inline std::vector<std::array<int, 3>> hull3d(const std::vector<V3>& pts) {
  const int n = static_cast<int>(pts.size());
  // Initial affinely independent quadruple.
  int i1 = -1, i2 = -1, i3 = -1;
  for (int i = 1; i < n && i1 < 0; ++i)
    if (!(pts[static_cast<size_t>(i)] == pts[0])) i1 = i;
  if (i1 < 0) throw std::invalid_argument("hull3d: rank 0 input");
  for (int i = 1; i < n && i2 < 0; ++i) {
    const V3 c = v3_cross(v3_sub(pts[static_cast<size_t>(i1)], pts[0]),
                          v3_sub(pts[static_cast<size_t>(i)], pts[0]));
    if (c.x || c.y || c.z) i2 = i;
  }
  if (i2 < 0) throw std::invalid_argument("hull3d: rank 1 input");
  for (int i = 1; i < n && i3 < 0; ++i)
    if (orient3d(pts[0], pts[static_cast<size_t>(i1)],
                 pts[static_cast<size_t>(i2)], pts[static_cast<size_t>(i)]))
      i3 = i;
  if (i3 < 0) throw std::invalid_argument("hull3d: rank 2 input");

  struct Face {
    int a, b, c;
    bool alive;
  };
  std::vector<Face> faces;
  std::unordered_map<int64_t, int> edge_owner;  // directed edge -> face
  const auto ekey = [n](int u, int v) {
    return static_cast<int64_t>(u) * n + v;
  };
  const auto add_face = [&](int a, int b, int c) {
    const int id = static_cast<int>(faces.size());
    faces.push_back({a, b, c, true});
    edge_owner[ekey(a, b)] = id;
    edge_owner[ekey(b, c)] = id;
    edge_owner[ekey(c, a)] = id;
  };
  const auto drop_face = [&](int id) {
    Face& f = faces[static_cast<size_t>(id)];
    f.alive = false;
    edge_owner.erase(ekey(f.a, f.b));
    edge_owner.erase(ekey(f.b, f.c));
    edge_owner.erase(ekey(f.c, f.a));
  };

  {
    const int quad[4] = {0, i1, i2, i3};
    for (int skip = 0; skip < 4; ++skip) {
      int tri[3], w = 0;
      for (int j = 0; j < 4; ++j)
        if (j != skip) tri[w++] = quad[j];
      const int opp = quad[skip];
      if (orient3d(pts[static_cast<size_t>(tri[0])],
                   pts[static_cast<size_t>(tri[1])],
                   pts[static_cast<size_t>(tri[2])],
                   pts[static_cast<size_t>(opp)]) > 0)
        std::swap(tri[1], tri[2]);
      add_face(tri[0], tri[1], tri[2]);
    }
  }

  // Deterministic pseudo-shuffled insertion order.
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    if (i != 0 && i != i1 && i != i2 && i != i3) order.push_back(i);
  uint64_t lcg = 0x9E3779B97F4A7C15ull ^ static_cast<uint64_t>(n);
  for (size_t i = order.size(); i > 1; --i) {
    lcg = lcg * 6364136223846793005ull + 1442695040888963407ull;
    std::swap(order[i - 1], order[(lcg >> 33) % i]);
  }

  std::vector<int> visible;
  for (int p : order) {
    visible.clear();
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      const Face& fc = faces[static_cast<size_t>(f)];
      if (!fc.alive) continue;
      if (orient3d(pts[static_cast<size_t>(fc.a)],
                   pts[static_cast<size_t>(fc.b)],
                   pts[static_cast<size_t>(fc.c)],
                   pts[static_cast<size_t>(p)]) > 0)
        visible.push_back(f);
    }
    if (visible.empty()) continue;
    std::vector<uint8_t> is_visible(faces.size(), 0);
    for (int f : visible) is_visible[static_cast<size_t>(f)] = 1;
    // Horizon: directed edges of visible faces whose twin is kept.
    std::vector<std::pair<int, int>> horizon;
    for (int f : visible) {
      const Face& fc = faces[static_cast<size_t>(f)];
      const int e[3][2] = {{fc.a, fc.b}, {fc.b, fc.c}, {fc.c, fc.a}};
      for (const auto& uv : e) {
        const auto it = edge_owner.find(ekey(uv[1], uv[0]));
        if (it == edge_owner.end() || !is_visible[static_cast<size_t>(it->second)])
          horizon.emplace_back(uv[0], uv[1]);
      }
    }
    for (int f : visible) drop_face(f);
    for (const auto& [u, v] : horizon) add_face(u, v, p);
  }

  std::vector<std::array<int, 3>> out;
  for (const Face& f : faces)
    if (f.alive) out.push_back({f.a, f.b, f.c});
  return out;
}

// Count of lattice points inside the convex body given by half-spaces
// n.q <= rhs, scanned column-by-column over x for each (y, z) of the
// bounding box.
struct HalfSpace {
  V3 n;
  __int128 rhs = 0;
};

inline int64_t count_lattice_points(const std::vector<HalfSpace>& planes,
                                    const V3& lo, const V3& hi) {
  int64_t total = 0;
  for (int64_t y = lo.y; y <= hi.y; ++y)
    for (int64_t z = lo.z; z <= hi.z; ++z) {
      int64_t xmin = lo.x, xmax = hi.x;
      bool empty = false;
      for (const HalfSpace& h : planes) {
        const __int128 r = h.rhs - static_cast<__int128>(h.n.y) * y -
                           static_cast<__int128>(h.n.z) * z;
        if (h.n.x == 0) {
          if (r < 0) {
            empty = true;
            break;
          }
        } else if (h.n.x > 0) {
          xmax = std::min(xmax, floor_div_i64(r, h.n.x));
        } else {
          xmin = std::max(xmin, ceil_div_i64(r, h.n.x));
        }
        if (xmin > xmax) {
          empty = true;
          break;
        }
      }
      if (!empty && xmax >= xmin) total += xmax - xmin + 1;
    }
  return total;
}

// 2-D convex hull (monotone chain) returning CCW vertices; exact int64.
inline std::vector<std::pair<int64_t, int64_t>> hull2d(
    std::vector<std::pair<int64_t, int64_t>> p) {
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  const auto cross2 = [](const std::pair<int64_t, int64_t>& o,
                         const std::pair<int64_t, int64_t>& a,
                         const std::pair<int64_t, int64_t>& b) -> __int128 {
    return static_cast<__int128>(a.first - o.first) * (b.second - o.second) -
           static_cast<__int128>(a.second - o.second) * (b.first - o.first);
  };
  if (p.size() <= 2) return p;
  std::vector<std::pair<int64_t, int64_t>> h(2 * p.size());
  size_t k = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

inline bool point_in_hull2d(
    const std::vector<std::pair<int64_t, int64_t>>& hull, int64_t x,
    int64_t y) {
  const auto side = [&](size_t i) -> __int128 {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    return static_cast<__int128>(b.first - a.first) * (y - a.second) -
           static_cast<__int128>(b.second - a.second) * (x - a.first);
  };
  if (hull.size() == 1) return x == hull[0].first && y == hull[0].second;
  if (hull.size() == 2) {
    // On-segment test for the degenerate two-vertex hull.
    const __int128 cr =
        static_cast<__int128>(hull[1].first - hull[0].first) *
            (y - hull[0].second) -
        static_cast<__int128>(hull[1].second - hull[0].second) *
            (x - hull[0].first);
    if (cr != 0) return false;
    return std::min(hull[0].first, hull[1].first) <= x &&
           x <= std::max(hull[0].first, hull[1].first) &&
           std::min(hull[0].second, hull[1].second) <= y &&
           y <= std::max(hull[0].second, hull[1].second);
  }
  for (size_t i = 0; i < hull.size(); ++i)
    if (side(i) < 0) return false;
  return true;
}

}  // namespace detail

// Fraction of lattice points of the convex hull of `points` that are absent
// from `points`.  Exact for d = 3 in every affine rank; NaN for d != 3.
inline double convexity_deficit(const std::vector<Site>& points, int d) {
  if (points.empty())
    throw std::invalid_argument("convexity_deficit: empty set");
  if (d != 3) return std::numeric_limits<double>::quiet_NaN();

  std::vector<detail::V3> pts;
  pts.reserve(points.size());
  for (const Site& s : points)
    pts.push_back({s[0], s[1], s[2]});
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const int64_t m = static_cast<int64_t>(pts.size());
  if (m == 1) return 0.0;

  detail::V3 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo.x = std::min(lo.x, p.x); hi.x = std::max(hi.x, p.x);
    lo.y = std::min(lo.y, p.y); hi.y = std::max(hi.y, p.y);
    lo.z = std::min(lo.z, p.z); hi.z = std::max(hi.z, p.z);
  }

  // Affine rank.
  const detail::V3 p0 = pts[0];
  detail::V3 e1{0, 0, 0}, nrm{0, 0, 0};
  bool rank1 = false, rank2 = false;
  for (const auto& p : pts) {
    const detail::V3 q = detail::v3_sub(p, p0);
    if (q.x || q.y || q.z) {
      e1 = q;
      rank1 = true;
      break;
    }
  }
  for (const auto& p : pts) {
    const detail::V3 c = detail::v3_cross(e1, detail::v3_sub(p, p0));
    if (c.x || c.y || c.z) {
      nrm = c;
      rank2 = true;
      break;
    }
  }
  bool rank3 = false;
  if (rank2)
    for (const auto& p : pts)
      if (detail::v3_dot(nrm, detail::v3_sub(p, p0)) != 0) {
        rank3 = true;
        break;
      }

  if (!rank2) {
    // Collinear: points are integer multiples of the primitive direction.
    (void)rank1;
    int64_t g = std::abs(e1.x);
    g = std::gcd(g, std::abs(e1.y));
    g = std::gcd(g, std::abs(e1.z));
    const detail::V3 dir{e1.x / g, e1.y / g, e1.z / g};
    const __int128 dd = detail::v3_dot(dir, dir);
    int64_t kmin = 0, kmax = 0;
    for (const auto& p : pts) {
      const int64_t k =
          static_cast<int64_t>(detail::v3_dot(dir, detail::v3_sub(p, p0)) / dd);
      kmin = std::min(kmin, k);
      kmax = std::max(kmax, k);
    }
    const int64_t total = kmax - kmin + 1;
    return 1.0 - static_cast<double>(m) / static_cast<double>(total);
  }

  if (!rank3) {
    // Coplanar: project out the axis with the largest normal component (a
    // bijection of the plane), take the 2-D hull there, and keep only the
    // projected candidates whose third coordinate solves the plane equation
    // integrally.
    int w = 0;
    int64_t best = std::abs(nrm.x);
    if (std::abs(nrm.y) > best) { w = 1; best = std::abs(nrm.y); }
    if (std::abs(nrm.z) > best) { w = 2; }
    const auto coord = [](const detail::V3& p, int axis) {
      return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
    };
    const int a1 = (w + 1) % 3, a2 = (w + 2) % 3;
    std::vector<std::pair<int64_t, int64_t>> proj;
    proj.reserve(pts.size());
    for (const auto& p : pts) proj.emplace_back(coord(p, a1), coord(p, a2));
    const auto hull = detail::hull2d(proj);
    const __int128 cplane = detail::v3_dot(nrm, p0);
    const int64_t nw = coord(nrm, w), n1 = coord(nrm, a1), n2 = coord(nrm, a2);
    int64_t total = 0;
    for (int64_t x1 = coord(lo, a1); x1 <= coord(hi, a1); ++x1)
      for (int64_t x2 = coord(lo, a2); x2 <= coord(hi, a2); ++x2) {
        if (!detail::point_in_hull2d(hull, x1, x2)) continue;
        const __int128 rem = cplane - static_cast<__int128>(n1) * x1 -
                             static_cast<__int128>(n2) * x2;
        if (rem % nw == 0) ++total;
      }
    return 1.0 - static_cast<double>(m) / static_cast<double>(total);
  }

  // Full rank: prune to points extreme in all three of their axis columns
  // (hull vertices are never strictly interior to any lattice column of the
  // set), build the exact hull, then count column-by-column.
  std::unordered_map<int64_t, std::pair<int64_t, int64_t>> ext_x, ext_y, ext_z;
  const auto key2 = [](int64_t a, int64_t b) {
    return (a + (1ll << 20)) * (1ll << 42) + (b + (1ll << 20));
  };
  const auto update = [](std::unordered_map<int64_t, std::pair<int64_t, int64_t>>& m2,
                         int64_t k, int64_t v) {
    auto it = m2.find(k);
    if (it == m2.end())
      m2.emplace(k, std::make_pair(v, v));
    else {
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  };
  for (const auto& p : pts) {
    update(ext_x, key2(p.y, p.z), p.x);
    update(ext_y, key2(p.x, p.z), p.y);
    update(ext_z, key2(p.x, p.y), p.z);
  }
  std::vector<detail::V3> cand;
  for (const auto& p : pts) {
    const auto& ex = ext_x.at(key2(p.y, p.z));
    const auto& ey = ext_y.at(key2(p.x, p.z));
    const auto& ez = ext_z.at(key2(p.x, p.y));
    if ((p.x == ex.first || p.x == ex.second) &&
        (p.y == ey.first || p.y == ey.second) &&
        (p.z == ez.first || p.z == ez.second))
      cand.push_back(p);
  }

  const auto facets = detail::hull3d(cand);
  std::map<std::array<int64_t, 4>, bool> seen;
  std::vector<detail::HalfSpace> planes;
  for (const auto& f : facets) {
    const detail::V3& a = cand[static_cast<size_t>(f[0])];
    const detail::V3& b = cand[static_cast<size_t>(f[1])];
    const detail::V3& c = cand[static_cast<size_t>(f[2])];
    detail::V3 n = detail::v3_cross(detail::v3_sub(b, a), detail::v3_sub(c, a));
    int64_t g = std::abs(n.x);
    g = std::gcd(g, std::abs(n.y));
    g = std::gcd(g, std::abs(n.z));
    if (g > 1) { n.x /= g; n.y /= g; n.z /= g; }
    const __int128 rhs = detail::v3_dot(n, a);
    const std::array<int64_t, 4> k{n.x, n.y, n.z,
                                   static_cast<int64_t>(rhs)};
    if (seen.emplace(k, true).second)
      planes.push_back({n, rhs});
  }
  const int64_t total = detail::count_lattice_points(planes, lo, hi);
  return 1.0 - static_cast<double>(m) / static_cast<double>(total);
}

}  // namespace fri::stats
