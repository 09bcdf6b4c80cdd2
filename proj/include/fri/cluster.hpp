#pragma once
// Occupied-bond configurations and their cluster geometry.
//
// A BondConfig stores the set of lattice edges traversed by at least one
// trajectory, clipped to a window box, plus the window sites occupied by
// length-0 trajectories.  A site is occupied iff it is incident to an
// occupied bond or is such a length-0 start.
//
// Storage is indexed on a "grid" box that pads the window by one ghost
// layer: ghost sites can never be occupied or carry bonds, so breadth-first
// searches and flood fills walk idx +/- stride without bounds checks.  Bonds
// are keyed on their lexicographically smaller endpoint: key = idx * d + axis
// means an edge from site(idx) to site(idx) + e_axis.  Small expected
// occupancy switches the container to a hash set; the dense path is a flat
// bitset.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fri/lattice.hpp"
#include "fri/sampler.hpp"

namespace fri {

struct DenseBits {
  std::vector<uint64_t> w;
  int64_t n = 0;

  void init(int64_t bits) {
    n = bits;
    w.assign(static_cast<size_t>((bits + 63) / 64), 0);
  }
  bool get(int64_t i) const {
    return (w[static_cast<size_t>(i >> 6)] >> (i & 63)) & 1;
  }
  void set(int64_t i) { w[static_cast<size_t>(i >> 6)] |= uint64_t{1} << (i & 63); }
  int64_t popcount() const {
    int64_t c = 0;
    for (uint64_t v : w) c += __builtin_popcountll(v);
    return c;
  }
};

enum class BondStorage { automatic, dense, sparse };

class BondConfig {
 public:
  BondConfig() = default;
  BondConfig(const Box& window, int d,
             BondStorage storage = BondStorage::automatic,
             double expected_marks_per_bond = 1.0)
      : window_(window), d_(d), grid_(Box{window.center, window.radius + 1}, d) {
    validate_box(window);
    validate_dim(d);
    if (storage == BondStorage::automatic) {
      const double occupancy = 1.0 - std::exp(-expected_marks_per_bond);
      dense_ = occupancy > 0.05 || grid_.size <= (int64_t{1} << 22);
    } else {
      dense_ = storage == BondStorage::dense;
    }
    if (dense_) {
      bits_.init(grid_.size * d_);
      occ_.init(grid_.size);
      zero_starts_.init(grid_.size);
    }
  }

  const Box& window() const { return window_; }
  int d() const { return d_; }
  const BoxIndexer& grid() const { return grid_; }
  bool dense() const { return dense_; }

  // --- mutation (grid-index based; used by the accumulators below) ---

  void set_bond_idx(int64_t idx, int axis) {
    const int64_t key = idx * d_ + axis;
    if (dense_) {
      bits_.set(key);
      occ_.set(idx);
      occ_.set(idx + grid_.stride[static_cast<size_t>(axis)]);
    } else {
      if (sparse_bits_.insert(key).second) {
        sparse_occ_.insert(idx);
        sparse_occ_.insert(idx + grid_.stride[static_cast<size_t>(axis)]);
      }
    }
  }
  void set_zero_start_idx(int64_t idx) {
    if (dense_) {
      zero_starts_.set(idx);
      occ_.set(idx);
    } else {
      sparse_zero_.insert(idx);
      sparse_occ_.insert(idx);
    }
  }

  // --- queries ---

  bool has_bond_idx(int64_t idx, int axis) const {
    const int64_t key = idx * d_ + axis;
    return dense_ ? bits_.get(key) : sparse_bits_.count(key) > 0;
  }
  bool occupied_idx(int64_t idx) const {
    return dense_ ? occ_.get(idx) : sparse_occ_.count(idx) > 0;
  }
  bool zero_start_idx(int64_t idx) const {
    return dense_ ? zero_starts_.get(idx) : sparse_zero_.count(idx) > 0;
  }

  // Site-level accessors; sites outside the window never carry anything.
  bool has_bond(const Site& s, int axis) const {
    if (!box_contains(window_, s, d_)) return false;
    Site t = s;
    t[axis] += 1;
    if (!box_contains(window_, t, d_)) return false;
    return has_bond_idx(grid_.index(s), axis);
  }
  bool occupied(const Site& s) const {
    return box_contains(window_, s, d_) && occupied_idx(grid_.index(s));
  }

  // Dense occupancy bits (word-level sweeps); dense storage only.
  const DenseBits& occupancy_bits() const {
    if (!dense_)
      throw std::logic_error("occupancy_bits: sparse storage has none");
    return occ_;
  }

  int64_t bond_count() const {
    return dense_ ? bits_.popcount()
                  : static_cast<int64_t>(sparse_bits_.size());
  }
  int64_t occupied_count() const {
    return dense_ ? occ_.popcount() : static_cast<int64_t>(sparse_occ_.size());
  }
  int64_t zero_start_count() const {
    return dense_ ? zero_starts_.popcount()
                  : static_cast<int64_t>(sparse_zero_.size());
  }

  // Occupied grid indices in ascending (lexicographic) order.
  std::vector<int64_t> occupied_indices() const {
    std::vector<int64_t> out;
    if (dense_) {
      for (int64_t i = 0; i < grid_.size; ++i)
        if (occ_.get(i)) out.push_back(i);
    } else {
      out.assign(sparse_occ_.begin(), sparse_occ_.end());
      std::sort(out.begin(), out.end());
    }
    return out;
  }

  // Bonds as (lower endpoint grid idx, axis), ascending.
  std::vector<std::pair<int64_t, int>> bonds() const {
    std::vector<std::pair<int64_t, int>> out;
    if (dense_) {
      for (size_t wi = 0; wi < bits_.w.size(); ++wi) {
        uint64_t word = bits_.w[wi];
        while (word) {
          const int bit = __builtin_ctzll(word);
          word &= word - 1;
          const int64_t key = static_cast<int64_t>(wi) * 64 + bit;
          out.emplace_back(key / d_, static_cast<int>(key % d_));
        }
      }
    } else {
      std::vector<int64_t> keys(sparse_bits_.begin(), sparse_bits_.end());
      std::sort(keys.begin(), keys.end());
      for (int64_t key : keys)
        out.emplace_back(key / d_, static_cast<int>(key % d_));
    }
    return out;
  }

 private:
  Box window_{};
  int d_ = 3;
  BoxIndexer grid_{};
  bool dense_ = true;
  DenseBits bits_, occ_, zero_starts_;
  std::unordered_set<int64_t> sparse_bits_, sparse_occ_, sparse_zero_;
};

// ---------------------------------------------------------------------------
// Accumulating trajectories into a BondConfig.

namespace detail {

// Scan visitor that marks bonds whose two endpoints lie inside the window.
// Tracks the walker's offset from the window center, the number of
// out-of-range axes, and the grid index incrementally; the grid index stays
// valid as a linear function of the coordinates even while outside.
struct BondAccumulator {
  BondConfig* bc;
  int d;
  int32_t radius;
  std::array<int64_t, kMaxDim> stride{};
  std::array<int32_t, kMaxDim> rel{};
  int out_axes = 0;
  int64_t gidx = 0;

  explicit BondAccumulator(BondConfig* b) : bc(b), d(b->d()) {
    radius = b->window().radius;
    stride = b->grid().stride;
  }

  bool begin(const Site& start, int64_t, int64_t, int64_t len) {
    const Site& c = bc->window().center;
    int32_t dist = 0;
    out_axes = 0;
    for (int i = 0; i < d; ++i) {
      rel[static_cast<size_t>(i)] = start[i] - c[i];
      const int32_t a = std::abs(rel[static_cast<size_t>(i)]);
      dist = std::max(dist, a);
      if (a > radius) ++out_axes;
    }
    // Too far away to ever reach the window: skip the replay (each
    // trajectory owns its stream, so skipping is exact).
    if (static_cast<int64_t>(dist) > static_cast<int64_t>(radius) + len)
      return false;
    if (len == 0) {
      if (out_axes == 0) bc->set_zero_start_idx(grid_index());
      return false;
    }
    gidx = grid_index();
    return true;
  }

  void step(int axis, int delta) {
    const size_t a = static_cast<size_t>(axis);
    const bool was_in = std::abs(rel[a]) <= radius;
    const bool was_all_in = out_axes == 0;
    const int64_t prev_gidx = gidx;
    rel[a] += delta;
    gidx += delta > 0 ? stride[a] : -stride[a];
    const bool now_in = std::abs(rel[a]) <= radius;
    if (was_in != now_in) out_axes += now_in ? -1 : 1;
    if (was_all_in && out_axes == 0)
      bc->set_bond_idx(delta > 0 ? prev_gidx : gidx, axis);
  }

  void end() {}

 private:
  int64_t grid_index() const {
    // Offset of the current position inside the ghost-padded grid.
    int64_t idx = 0;
    for (int i = 0; i < d; ++i)
      idx += (int64_t{rel[static_cast<size_t>(i)]} + radius + 1) *
             stride[static_cast<size_t>(i)];
    return idx;
  }
};

inline void replay_into(BondAccumulator& acc, const Trajectory& t) {
  if (!acc.begin(t.start, 0, 0, t.length())) return;
  for (uint8_t dir : t.dirs)
    acc.step(direction_axis(dir), direction_delta(dir));
  acc.end();
}

}  // namespace detail

// Bonds of a materialized sample, clipped to its window.
inline BondConfig build_bonds(const FriSample& s,
                              BondStorage storage = BondStorage::automatic) {
  BondConfig bc(s.window, s.params.d, storage,
                2.0 * s.params.u * s.params.survival());
  detail::BondAccumulator acc(&bc);
  for (const Trajectory& t : s.trajectories) detail::replay_into(acc, t);
  return bc;
}

// Union of several samples over one common window (thinning recomposition).
inline BondConfig build_bonds_union(
    const std::vector<FriSample>& parts,
    BondStorage storage = BondStorage::automatic) {
  if (parts.empty()) throw std::invalid_argument("build_bonds_union: empty");
  double u_total = 0.0;
  for (const FriSample& s : parts) {
    if (s.params.d != parts[0].params.d ||
        linf_distance(s.window.center, parts[0].window.center,
                      s.params.d) != 0 ||
        s.window.radius != parts[0].window.radius)
      throw std::invalid_argument("build_bonds_union: mismatched windows");
    u_total += s.params.u;
  }
  BondConfig bc(parts[0].window, parts[0].params.d, storage,
                2.0 * u_total * parts[0].params.survival());
  detail::BondAccumulator acc(&bc);
  for (const FriSample& s : parts)
    for (const Trajectory& t : s.trajectories) detail::replay_into(acc, t);
  return bc;
}

// Sample straight into a bond configuration without materializing
// trajectories (the path used by the large experiments).
inline BondConfig sample_bonds(const FriParams& p, const Box& window,
                               int margin, uint64_t seed,
                               const ScanLimits& limits = {},
                               BondStorage storage = BondStorage::automatic) {
  BondConfig bc(window, p.d, storage, 2.0 * p.u * p.survival());
  detail::BondAccumulator acc(&bc);
  scan_trajectories(p, window, margin, seed, acc, limits);
  return bc;
}

// ---------------------------------------------------------------------------
// Cluster labels via union-find.  The label of an occupied site is the grid
// index of the lexicographically smallest site of its cluster, which is
// deterministic and storage-independent.

struct ClusterLabels {
  Box window{};
  int d = 3;
  BoxIndexer grid{};
  std::vector<int32_t> label;  // per grid index; -1 = unoccupied
  int64_t cluster_count = 0;

  int64_t label_of(const Site& s) const {
    if (!box_contains(window, s, d)) return -1;
    return label[static_cast<size_t>(grid.index(s))];
  }
};

inline ClusterLabels build_clusters(const BondConfig& bc) {
  const BoxIndexer& g = bc.grid();
  if (g.size > (int64_t{1} << 26))
    throw std::invalid_argument("build_clusters: window too large; "
                                "use scan_components for giant windows");
  ClusterLabels cl;
  cl.window = bc.window();
  cl.d = bc.d();
  cl.grid = g;
  std::vector<int32_t> parent(static_cast<size_t>(g.size));
  for (int64_t i = 0; i < g.size; ++i)
    parent[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  auto find = [&](int32_t x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] =
          parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  for (const auto& [idx, axis] : bc.bonds()) {
    const int32_t a = find(static_cast<int32_t>(idx));
    const int32_t b = find(static_cast<int32_t>(
        idx + g.stride[static_cast<size_t>(axis)]));
    if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
  }
  cl.label.assign(static_cast<size_t>(g.size), -1);
  for (int64_t i : bc.occupied_indices()) {
    const int32_t root = find(static_cast<int32_t>(i));
    // Roots are minimal by construction (unions attach larger to smaller
    // and every occupied site was its own parent initially), so the root's
    // grid index is the lexicographic minimum of the cluster.
    cl.label[static_cast<size_t>(i)] = root;
    if (root == static_cast<int32_t>(i)) ++cl.cluster_count;
  }
  return cl;
}

struct ClusterInfo {
  Site id{};         // lexicographically smallest member
  int64_t size = 0;  // occupied sites
};

inline ClusterInfo largest_cluster(const ClusterLabels& cl) {
  std::unordered_map<int32_t, int64_t> sizes;
  for (int32_t l : cl.label)
    if (l >= 0) ++sizes[l];
  ClusterInfo best;
  int32_t best_label = -1;
  for (const auto& [l, n] : sizes) {
    if (n > best.size || (n == best.size && (best_label < 0 || l < best_label))) {
      best.size = n;
      best_label = l;
    }
  }
  if (best_label >= 0) best.id = cl.grid.site(best_label);
  return best;
}

// ---------------------------------------------------------------------------
// Whole-window component scan by flood fill; handles windows too large for
// label arrays.  Reports the component of a marked origin plus the global
// maximum, which is what the conditioned experiments need.

struct ComponentScan {
  bool origin_occupied = false;
  int64_t origin_size = 0;
  bool origin_touches_boundary = false;
  int64_t max_size = 0;         // over all components
  int64_t component_count = 0;
  bool origin_is_giant = false;  // occupied, maximal size, touches boundary
  DenseBits origin_mask;         // filled iff keep_origin_mask
};

namespace detail {

// Flood one component from `seed_idx` over visited bits; returns its size
// and whether it touches the window's internal boundary.  The queue holds
// grid indices; consumed prefixes are trimmed to bound memory by the live
// frontier.
template <class OnSite>
inline std::pair<int64_t, bool> flood_component(
    const BondConfig& bc, int64_t seed_idx, DenseBits& visited,
    OnSite&& on_site) {
  const BoxIndexer& g = bc.grid();
  const int d = bc.d();
  const int32_t ghost_radius = g.box.radius;  // window radius + 1
  std::vector<int64_t> queue;
  size_t head = 0;
  visited.set(seed_idx);
  queue.push_back(seed_idx);
  int64_t size = 0;
  bool touches = false;
  while (head < queue.size()) {
    const int64_t at = queue[head++];
    if (head > (size_t{1} << 20) && head * 2 > queue.size()) {
      queue.erase(queue.begin(), queue.begin() + static_cast<int64_t>(head));
      head = 0;
    }
    ++size;
    on_site(at);
    if (!touches) {
      const Site s = g.site(at);
      touches = linf_distance(s, g.box.center, d) >= ghost_radius - 1;
    }
    for (int axis = 0; axis < d; ++axis) {
      const int64_t stride = g.stride[static_cast<size_t>(axis)];
      if (bc.has_bond_idx(at, axis) && !visited.get(at + stride)) {
        visited.set(at + stride);
        queue.push_back(at + stride);
      }
      if (bc.has_bond_idx(at - stride, axis) && !visited.get(at - stride)) {
        visited.set(at - stride);
        queue.push_back(at - stride);
      }
    }
  }
  return {size, touches};
}

}  // namespace detail

inline ComponentScan scan_components(const BondConfig& bc, const Site& origin,
                                     bool keep_origin_mask = false) {
  const BoxIndexer& g = bc.grid();
  ComponentScan out;
  DenseBits visited;
  visited.init(g.size);
  if (keep_origin_mask) out.origin_mask.init(g.size);

  if (box_contains(bc.window(), origin, bc.d()) && bc.occupied(origin)) {
    out.origin_occupied = true;
    const int64_t oidx = g.index(origin);
    auto [size, touches] = detail::flood_component(
        bc, oidx, visited, [&](int64_t at) {
          if (keep_origin_mask) out.origin_mask.set(at);
        });
    out.origin_size = size;
    out.origin_touches_boundary = touches;
    out.max_size = size;
    out.component_count = 1;
  }

  if (bc.dense()) {
    // Word-level sweep over occupancy bits.
    const DenseBits& occ = bc.occupancy_bits();
    for (size_t wi = 0; wi < occ.w.size(); ++wi) {
      uint64_t word = occ.w[wi];
      while (word) {
        const int bit = __builtin_ctzll(word);
        word &= word - 1;
        const int64_t idx = static_cast<int64_t>(wi) * 64 + bit;
        if (visited.get(idx)) continue;
        auto [size, touches] =
            detail::flood_component(bc, idx, visited, [](int64_t) {});
        (void)touches;
        ++out.component_count;
        out.max_size = std::max(out.max_size, size);
      }
    }
  } else {
    for (int64_t idx : bc.occupied_indices()) {
      if (visited.get(idx)) continue;
      auto [size, touches] =
          detail::flood_component(bc, idx, visited, [](int64_t) {});
      (void)touches;
      ++out.component_count;
      out.max_size = std::max(out.max_size, size);
    }
  }
  out.origin_is_giant = out.origin_occupied &&
                        out.origin_size == out.max_size &&
                        out.origin_touches_boundary;
  return out;
}

// ---------------------------------------------------------------------------
// Chemical distance (occupied-bond graph distance) and chemical balls.

namespace detail {

struct BfsEntry {
  int64_t gidx;  // index in the bond grid
  int64_t ridx;  // index in the BFS region grid
};

}  // namespace detail

// Graph distance between two window sites along occupied bonds, or -1 when
// they are not connected (including either endpoint being unoccupied).
inline int64_t chemical_distance(const BondConfig& bc, const Site& from,
                                 const Site& to) {
  const int d = bc.d();
  if (!box_contains(bc.window(), from, d) ||
      !box_contains(bc.window(), to, d))
    throw std::invalid_argument("chemical_distance: site outside window");
  if (!bc.occupied(from) || !bc.occupied(to)) return -1;
  const BoxIndexer& g = bc.grid();
  if (g.size > (int64_t{1} << 26))
    throw std::invalid_argument("chemical_distance: window too large");
  const int64_t target = g.index(to);
  int64_t at = g.index(from);
  if (at == target) return 0;
  std::vector<int32_t> dist(static_cast<size_t>(g.size), -1);
  dist[static_cast<size_t>(at)] = 0;
  std::vector<int64_t> queue{at};
  size_t head = 0;
  while (head < queue.size()) {
    at = queue[head++];
    const int32_t dv = dist[static_cast<size_t>(at)];
    for (int axis = 0; axis < d; ++axis) {
      const int64_t stride = g.stride[static_cast<size_t>(axis)];
      for (const int64_t nb : {at + stride, at - stride}) {
        const bool bonded = nb > at ? bc.has_bond_idx(at, axis)
                                    : bc.has_bond_idx(nb, axis);
        if (!bonded || dist[static_cast<size_t>(nb)] >= 0) continue;
        if (nb == target) return dv + 1;
        dist[static_cast<size_t>(nb)] = dv + 1;
        queue.push_back(nb);
      }
    }
  }
  return -1;
}

// Chemical ball of radius n around `origin` as a 0/1 mask over the region
// B(origin, n); a path of length <= n cannot leave that box.  Empty (all
// zeros) when the origin is unoccupied.
struct ChemicalBall {
  BoxIndexer region;  // radius n+1 around origin (one ghost layer)
  std::vector<uint8_t> mask;
  int64_t count = 0;
};

inline ChemicalBall chemical_ball_mask(const BondConfig& bc,
                                       const Site& origin, int32_t n) {
  const int d = bc.d();
  if (n < 0) throw std::invalid_argument("chemical_ball: negative radius");
  if (!box_contains(bc.window(), origin, d))
    throw std::invalid_argument("chemical_ball: origin outside window");
  ChemicalBall ball;
  ball.region = BoxIndexer(Box{origin, n + 1}, d);
  ball.mask.assign(static_cast<size_t>(ball.region.size), 0);
  if (!bc.occupied(origin)) return ball;
  const BoxIndexer& g = bc.grid();
  std::vector<int32_t> dist(static_cast<size_t>(ball.region.size), -1);
  const detail::BfsEntry start{g.index(origin), ball.region.index(origin)};
  dist[static_cast<size_t>(start.ridx)] = 0;
  ball.mask[static_cast<size_t>(start.ridx)] = 1;
  ball.count = 1;
  std::vector<detail::BfsEntry> queue{start};
  size_t head = 0;
  while (head < queue.size()) {
    const auto [gat, rat] = queue[head++];
    const int32_t dv = dist[static_cast<size_t>(rat)];
    if (dv == n) continue;
    for (int axis = 0; axis < d; ++axis) {
      const int64_t gs = g.stride[static_cast<size_t>(axis)];
      const int64_t rs = ball.region.stride[static_cast<size_t>(axis)];
      for (int sign = 0; sign < 2; ++sign) {
        const int64_t gnb = sign ? gat - gs : gat + gs;
        const int64_t rnb = sign ? rat - rs : rat + rs;
        const bool bonded = sign ? bc.has_bond_idx(gnb, axis)
                                 : bc.has_bond_idx(gat, axis);
        if (!bonded || dist[static_cast<size_t>(rnb)] >= 0) continue;
        dist[static_cast<size_t>(rnb)] = dv + 1;
        ball.mask[static_cast<size_t>(rnb)] = 1;
        ++ball.count;
        queue.push_back({gnb, rnb});
      }
    }
  }
  return ball;
}

inline std::vector<Site> chemical_ball(const BondConfig& bc,
                                       const Site& origin, int32_t n) {
  const ChemicalBall ball = chemical_ball_mask(bc, origin, n);
  std::vector<Site> out;
  out.reserve(static_cast<size_t>(ball.count));
  for (int64_t i = 0; i < ball.region.size; ++i)
    if (ball.mask[static_cast<size_t>(i)]) out.push_back(ball.region.site(i));
  return out;
}

// ---------------------------------------------------------------------------
// Left-right crossing: does some occupied-bond path inside `box` join its
// minus face to its plus face along `axis`?

inline bool crossing_exists(const BondConfig& bc, const Box& box, int axis) {
  const int d = bc.d();
  validate_box(box);
  if (axis < 0 || axis >= d) throw std::invalid_argument("crossing: bad axis");
  if (linf_distance(box.center, bc.window().center, d) + box.radius >
      bc.window().radius)
    throw std::invalid_argument("crossing: box not inside window");
  const BoxIndexer& g = bc.grid();
  const BoxIndexer region(Box{box.center, box.radius + 1}, d);
  DenseBits visited;
  visited.init(region.size);
  // Pre-visit the ghost ring so the search never leaves the box.
  for (int64_t r = 0; r < region.size; ++r) {
    const Site s = region.site(r);
    if (linf_distance(s, box.center, d) > box.radius) visited.set(r);
  }
  const int32_t plus_coord = box.center[axis] + box.radius;
  std::vector<detail::BfsEntry> queue;
  for (const Site& s : face(box, axis, -1, d)) {
    if (!bc.occupied(s)) continue;
    const int64_t r = region.index(s);
    if (visited.get(r)) continue;
    visited.set(r);
    queue.push_back({g.index(s), r});
  }
  size_t head = 0;
  while (head < queue.size()) {
    const auto [gat, rat] = queue[head++];
    const Site s = region.site(rat);
    if (s[axis] == plus_coord) return true;
    for (int ax = 0; ax < d; ++ax) {
      const int64_t gs = g.stride[static_cast<size_t>(ax)];
      const int64_t rs = region.stride[static_cast<size_t>(ax)];
      for (int sign = 0; sign < 2; ++sign) {
        const int64_t gnb = sign ? gat - gs : gat + gs;
        const int64_t rnb = sign ? rat - rs : rat + rs;
        const bool bonded = sign ? bc.has_bond_idx(gnb, ax)
                                 : bc.has_bond_idx(gat, ax);
        if (!bonded || visited.get(rnb)) continue;
        visited.set(rnb);
        queue.push_back({gnb, rnb});
      }
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Local uniqueness.  Restricted to B(center, R), find clusters of l-infinity
// diameter >= R/10; the event is violated when two of them fail to connect
// inside B(center, 2R).

inline bool local_uniqueness_violated(const BondConfig& bc, int32_t big_r) {
  const int d = bc.d();
  if (big_r < 1) throw std::invalid_argument("local_uniqueness: R < 1");
  if (2 * big_r > bc.window().radius)
    throw std::invalid_argument("local_uniqueness: window smaller than B(2R)");
  const Site c = bc.window().center;
  const BoxIndexer& g = bc.grid();

  // Pass 1: components of the restriction to B(R); keep a representative of
  // every cluster with 10 * diameter >= R (diameter = max coordinate extent).
  const BoxIndexer region(Box{c, big_r + 1}, d);
  DenseBits visited;
  visited.init(region.size);
  for (int64_t r0 = 0; r0 < region.size; ++r0)
    if (linf_distance(region.site(r0), c, d) > big_r) visited.set(r0);
  std::vector<int64_t> big_reps;  // grid indices
  for (int64_t r0 = 0; r0 < region.size; ++r0) {
    if (visited.get(r0)) continue;
    const Site s = region.site(r0);
    if (!bc.occupied(s)) continue;
    visited.set(r0);
    std::array<int32_t, kMaxDim> lo{}, hi{};
    for (int i = 0; i < d; ++i) lo[static_cast<size_t>(i)] = hi[static_cast<size_t>(i)] = s[i];
    std::vector<detail::BfsEntry> queue{{g.index(s), r0}};
    size_t head = 0;
    while (head < queue.size()) {
      const auto [gat, rat] = queue[head++];
      const Site at = region.site(rat);
      for (int i = 0; i < d; ++i) {
        lo[static_cast<size_t>(i)] = std::min(lo[static_cast<size_t>(i)], at[i]);
        hi[static_cast<size_t>(i)] = std::max(hi[static_cast<size_t>(i)], at[i]);
      }
      for (int ax = 0; ax < d; ++ax) {
        const int64_t gs = g.stride[static_cast<size_t>(ax)];
        const int64_t rs = region.stride[static_cast<size_t>(ax)];
        for (int sign = 0; sign < 2; ++sign) {
          const int64_t gnb = sign ? gat - gs : gat + gs;
          const int64_t rnb = sign ? rat - rs : rat + rs;
          const bool bonded = sign ? bc.has_bond_idx(gnb, ax)
                                   : bc.has_bond_idx(gat, ax);
          if (!bonded || visited.get(rnb)) continue;
          visited.set(rnb);
          queue.push_back({gnb, rnb});
        }
      }
    }
    int32_t diam = 0;
    for (int i = 0; i < d; ++i)
      diam = std::max(diam, hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]);
    if (10 * int64_t{diam} >= big_r) big_reps.push_back(g.index(s));
  }
  if (big_reps.size() < 2) return false;

  // Pass 2: flood the component of the first representative inside B(2R);
  // connectivity is transitive, so a violation exists iff some other
  // representative is left unreached.
  const BoxIndexer region2(Box{c, 2 * big_r + 1}, d);
  DenseBits visited2;
  visited2.init(region2.size);
  for (int64_t r0 = 0; r0 < region2.size; ++r0)
    if (linf_distance(region2.site(r0), c, d) > 2 * big_r) visited2.set(r0);
  const Site rep0 = g.site(big_reps[0]);
  std::vector<detail::BfsEntry> queue{{big_reps[0], region2.index(rep0)}};
  visited2.set(region2.index(rep0));
  size_t head = 0;
  while (head < queue.size()) {
    const auto [gat, rat] = queue[head++];
    for (int ax = 0; ax < d; ++ax) {
      const int64_t gs = g.stride[static_cast<size_t>(ax)];
      const int64_t rs = region2.stride[static_cast<size_t>(ax)];
      for (int sign = 0; sign < 2; ++sign) {
        const int64_t gnb = sign ? gat - gs : gat + gs;
        const int64_t rnb = sign ? rat - rs : rat + rs;
        const bool bonded = sign ? bc.has_bond_idx(gnb, ax)
                                 : bc.has_bond_idx(gat, ax);
        if (!bonded || visited2.get(rnb)) continue;
        visited2.set(rnb);
        queue.push_back({gnb, rnb});
      }
    }
  }
  for (size_t i = 1; i < big_reps.size(); ++i) {
    const Site rep = g.site(big_reps[i]);
    if (!visited2.get(region2.index(rep))) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Plain-text edge list: one bond per line, the two endpoints' coordinates
// separated by spaces, in ascending (site, axis) order.

inline void export_edge_list(const BondConfig& bc, std::ostream& os) {
  const int d = bc.d();
  const BoxIndexer& g = bc.grid();
  for (const auto& [idx, axis] : bc.bonds()) {
    const Site a = g.site(idx);
    Site b = a;
    b[axis] += 1;
    for (int i = 0; i < d; ++i) os << a[i] << ' ';
    for (int i = 0; i < d; ++i) {
      os << b[i];
      os << (i + 1 < d ? ' ' : '\n');
    }
  }
}

}  // namespace fri
