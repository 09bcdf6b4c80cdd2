#pragma once
// Deterministic random-number streams.
//
// Every random quantity in the library is a pure function of a 64-bit master
// seed and a chain of derivation tags (purpose, replica index, site index,
// trajectory index).  Streams are xoshiro256++ generators whose state is
// expanded from a derived key with splitmix64.  No <random> distributions are
// used anywhere: their output is implementation-defined, which would break
// byte-identical reproducibility of recorded rows across platforms.

#include <cmath>
#include <cstdint>
#include <limits>

namespace fri::rng {

// splitmix64 finalizer; bijective on 64-bit words.
inline constexpr uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Absorb one tag into a key.  The chain is positional:
// derive(derive(k,a),b) != derive(derive(k,b),a) in general.
inline constexpr uint64_t derive(uint64_t key, uint64_t tag) {
  return mix64(key ^ (tag + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2)));
}
inline constexpr uint64_t derive(uint64_t key, uint64_t a, uint64_t b) {
  return derive(derive(key, a), b);
}
inline constexpr uint64_t derive(uint64_t key, uint64_t a, uint64_t b,
                                 uint64_t c) {
  return derive(derive(derive(key, a), b), c);
}

// Purpose tags.  Fixed constants; part of the reproducibility contract
// (changing one changes every sample drawn under it).
enum : uint64_t {
  tag_field = 0xF1E1D001,     // per-site trajectory counts / occupancy skips
  tag_walk = 0xF1E1D002,      // per-trajectory length + direction stream
  tag_replica = 0xF1E1D003,   // per-replica experiment streams
  tag_thin = 0xF1E1D004,      // thinned sub-process seeds
  tag_coupling = 0xF1E1D005,  // per-trajectory coupling uniforms
  tag_cluster_walk = 0xF1E1D006,  // lazy walks on occupied clusters
  tag_mc = 0xF1E1D007,        // monte-carlo estimators
};

class Stream {  // xoshiro256++
 public:
  explicit Stream(uint64_t key) {
    uint64_t z = key;
    for (auto& w : s_) {
      z = mix64(z);
      w = z;
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9e3779b97f4a7c15ULL;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); never 0 or 1, so logs are safe.
  double next_open01();

  // Uniform integer in [0, n), n < 2^32, without rejection (multiply-shift).
  // Bias is < n / 2^64, far below anything the test suite can resolve.
  uint32_t next_below(uint32_t n) {
    return static_cast<uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  static constexpr uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  uint64_t s_[4];
};

// Map a word to the open interval (0,1); never 0 or 1, so logs are safe.
// Bin centers (2k+1)/2^53 are exactly representable, so no rounding can
// push the result onto an endpoint.
inline constexpr double to_open01(uint64_t x) {
  return static_cast<double>(x >> 12) * 0x1.0p-52 + 0x1.0p-53;
}

inline double Stream::next_open01() { return to_open01(next_u64()); }

// Geometric on {0,1,2,...} with P(L=k) = (1-s)s^k, sampled by inversion:
// L = floor(ln U / ln s).  E[L] = s/(1-s).
inline int64_t geometric_with_log(Stream& g, double log_s) {
  if (!(log_s < 0.0)) return 0;  // s >= 1 is rejected upstream; s == 0 -> -inf
  const double v = std::log(g.next_open01()) / log_s;
  if (v >= 9.2e18) return std::numeric_limits<int64_t>::max() / 2;
  return static_cast<int64_t>(v);
}

inline int64_t geometric(Stream& g, double s) {
  if (s <= 0.0) {
    (void)g.next_open01();  // keep stream consumption identical
    return 0;
  }
  return geometric_with_log(g, std::log(s));
}

namespace detail {

// Walk the Poisson pmf until the cdf passes u.  Callers pass u in (0,1);
// passing a shifted u yields truncated variants.
inline int64_t poisson_inversion(double lambda, double u) {
  double p = std::exp(-lambda);
  double f = p;
  int64_t k = 0;
  while (u > f && k < 4000) {
    ++k;
    p *= lambda / static_cast<double>(k);
    f += p;
  }
  return k;
}

// Hormann's PTRS transformed-rejection sampler; exact for lambda >= 10.
inline int64_t poisson_ptrs(Stream& g, double lambda) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = g.next_open01() - 0.5;
    const double v = g.next_open01();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        k * loglam - lambda - std::lgamma(k + 1.0)) {
      return static_cast<int64_t>(k);
    }
  }
}

}  // namespace detail

inline int64_t poisson(Stream& g, double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda < 10.0) return detail::poisson_inversion(lambda, g.next_open01());
  return detail::poisson_ptrs(g, lambda);
}

// Poisson conditioned on being >= 1 (occupied-site counts in the sampler's
// skip path).  For small lambda, shift the inversion uniform past the k=0
// mass; for large lambda, rejection against the unconditioned sampler.
inline int64_t poisson_positive(Stream& g, double lambda) {
  if (lambda < 10.0) {
    const double p0 = std::exp(-lambda);
    const double u = p0 + g.next_open01() * (1.0 - p0);
    const int64_t k = detail::poisson_inversion(lambda, u);
    return k >= 1 ? k : 1;
  }
  for (;;) {
    const int64_t k = detail::poisson_ptrs(g, lambda);
    if (k >= 1) return k;
  }
}

}  // namespace fri::rng
