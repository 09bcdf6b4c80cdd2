#pragma once
// Z^d lattice primitives with the dimension d in {3,4,5} chosen at runtime.
//
// A Site carries kMaxDim int32 coordinates; entries at positions >= d are
// kept at zero so that full-array comparison equals lexicographic comparison
// of the first d coordinates.  Directions are encoded as dir in [0, 2d) with
// axis = dir >> 1 and the minus step before the plus step on each axis, which
// fixes the neighbor enumeration order everywhere.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fri {

inline constexpr int kMinDim = 3;
inline constexpr int kMaxDim = 5;

inline void validate_dim(int d) {
  if (d < kMinDim || d > kMaxDim)
    throw std::invalid_argument("dimension must be in [3,5], got " +
                                std::to_string(d));
}

struct Site {
  std::array<int32_t, kMaxDim> c{};

  int32_t& operator[](int i) { return c[static_cast<size_t>(i)]; }
  int32_t operator[](int i) const { return c[static_cast<size_t>(i)]; }
  auto operator<=>(const Site&) const = default;
};

inline Site make_site(std::initializer_list<int32_t> coords) {
  if (coords.size() < static_cast<size_t>(kMinDim) ||
      coords.size() > static_cast<size_t>(kMaxDim))
    throw std::invalid_argument("site needs 3..5 coordinates");
  Site s;
  int i = 0;
  for (int32_t v : coords) s.c[static_cast<size_t>(i++)] = v;
  return s;
}

inline constexpr int direction_axis(int dir) { return dir >> 1; }
inline constexpr int direction_delta(int dir) { return (dir & 1) ? 1 : -1; }

inline Site offset_site(const Site& s, int axis, int delta) {
  Site r = s;
  r[axis] += delta;
  return r;
}

inline int32_t linf_distance(const Site& a, const Site& b, int d) {
  int32_t m = 0;
  for (int i = 0; i < d; ++i) {
    const int32_t v = a[i] >= b[i] ? a[i] - b[i] : b[i] - a[i];
    if (v > m) m = v;
  }
  return m;
}

inline int64_t l1_distance(const Site& a, const Site& b, int d) {
  int64_t t = 0;
  for (int i = 0; i < d; ++i)
    t += a[i] >= b[i] ? int64_t{a[i]} - b[i] : int64_t{b[i]} - a[i];
  return t;
}

// Neighbors in axis-major order, minus step before plus step:
// x-e_0, x+e_0, x-e_1, x+e_1, ...
inline std::vector<Site> neighbors(const Site& s, int d) {
  validate_dim(d);
  std::vector<Site> out;
  out.reserve(static_cast<size_t>(2 * d));
  for (int dir = 0; dir < 2 * d; ++dir)
    out.push_back(offset_site(s, direction_axis(dir), direction_delta(dir)));
  return out;
}

// Closed l-infinity ball: all sites within radius of center (side 2R+1).
struct Box {
  Site center{};
  int32_t radius = 0;
};

inline void validate_box(const Box& b) {
  if (b.radius < 0) throw std::invalid_argument("box radius must be >= 0");
}

inline bool box_contains(const Box& b, const Site& s, int d) {
  return linf_distance(b.center, s, d) <= b.radius;
}

inline int64_t box_volume(const Box& b, int d) {
  int64_t v = 1;
  const int64_t side = 2 * int64_t{b.radius} + 1;
  for (int i = 0; i < d; ++i) v *= side;
  return v;
}

// Packed indexing of box sites.  Axis 0 is the most significant axis, so
// ascending packed index equals lexicographic order on coordinate tuples;
// cluster ids below rely on this.
struct BoxIndexer {
  Box box;
  int d = 3;
  int64_t side = 1;
  int64_t size = 1;
  std::array<int64_t, kMaxDim> stride{};
  std::array<int32_t, kMaxDim> lo{};

  BoxIndexer() = default;
  BoxIndexer(const Box& b, int dim) : box(b), d(dim) {
    validate_dim(dim);
    validate_box(b);
    side = 2 * int64_t{b.radius} + 1;
    int64_t s = 1;
    for (int i = d - 1; i >= 0; --i) {
      stride[static_cast<size_t>(i)] = s;
      s *= side;
    }
    size = s;
    for (int i = 0; i < d; ++i)
      lo[static_cast<size_t>(i)] = b.center[i] - b.radius;
  }

  bool contains(const Site& s) const { return box_contains(box, s, d); }

  int64_t index(const Site& s) const {
    int64_t idx = 0;
    for (int i = 0; i < d; ++i)
      idx += (int64_t{s[i]} - lo[static_cast<size_t>(i)]) *
             stride[static_cast<size_t>(i)];
    return idx;
  }

  Site site(int64_t idx) const {
    Site s;
    for (int i = d - 1; i >= 0; --i) {
      s[i] = static_cast<int32_t>(idx % side) + lo[static_cast<size_t>(i)];
      idx /= side;
    }
    return s;
  }
};

// All sites of the box in packed (lexicographic) order.  Guarded: meant for
// boxes small enough to materialize.
inline std::vector<Site> box_sites(const Box& b, int d) {
  BoxIndexer ix(b, d);
  if (ix.size > (int64_t{1} << 28))
    throw std::invalid_argument("box too large to enumerate");
  std::vector<Site> out;
  out.reserve(static_cast<size_t>(ix.size));
  for (int64_t i = 0; i < ix.size; ++i) out.push_back(ix.site(i));
  return out;
}

// Sites of the box having at least one neighbor outside it, i.e. some
// coordinate at distance exactly radius from the center.
inline std::vector<Site> internal_boundary(const Box& b, int d) {
  std::vector<Site> out;
  for (const Site& s : box_sites(b, d))
    if (linf_distance(b.center, s, d) == b.radius) out.push_back(s);
  return out;
}

// The face of the box in the given axis direction: sites with that
// coordinate pinned to center +/- radius.
inline std::vector<Site> face(const Box& b, int axis, int sign, int d) {
  validate_dim(d);
  validate_box(b);
  if (axis < 0 || axis >= d) throw std::invalid_argument("face: bad axis");
  if (sign != 1 && sign != -1) throw std::invalid_argument("face: bad sign");
  const int32_t pinned = b.center[axis] + sign * b.radius;
  std::vector<Site> out;
  for (const Site& s : box_sites(b, d))
    if (s[axis] == pinned) out.push_back(s);
  return out;
}

}  // namespace fri
