#pragma once

// Test-only reference implementations, written independently of the library
// code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "mala/agglomerate.hpp"
#include "mala/volume.hpp"

namespace mala::testing {

inline AffinityVolume random_affinities(const Shape3& s, std::mt19937_64& rng, bool open_interval = true) {
  AffinityVolume aff(s);
  std::uniform_real_distribution<float> u(open_interval ? 0.001f : 0.0f, open_interval ? 0.999f : 1.0f);
  for_each_edge(s, [&](std::uint64_t flat, std::uint64_t, std::uint64_t) { aff.data[flat] = u(rng); });
  return aff;
}

// Labels 0..n_labels, background included when with_background.
inline LabelVolume random_labels(const Shape3& s, std::mt19937_64& rng, int n_labels, bool with_background) {
  LabelVolume gt(s);
  std::uniform_int_distribution<int> d(with_background ? 0 : 1, n_labels);
  for (auto& l : gt.data) l = static_cast<Label>(d(rng));
  return gt;
}

inline Shape3 random_shape(std::mt19937_64& rng, std::uint64_t max_dim) {
  std::uniform_int_distribution<std::uint64_t> d(1, max_dim);
  return {d(rng), d(rng), d(rng)};
}

struct GridEdgeRef {
  std::uint64_t flat, u, v;
};

inline std::vector<GridEdgeRef> enumerate_edges_by_coords(const Shape3& s) {
  // Walks coordinates and neighbour offsets rather than the library iterator.
  std::vector<GridEdgeRef> out;
  const auto n = s.voxels();
  for (std::uint64_t z = 0; z < s.z; ++z)
    for (std::uint64_t y = 0; y < s.y; ++y)
      for (std::uint64_t x = 0; x < s.x; ++x) {
        const auto v = (z * s.y + y) * s.x + x;
        if (z > 0) out.push_back({0 * n + v, ((z - 1) * s.y + y) * s.x + x, v});
        if (y > 0) out.push_back({1 * n + v, (z * s.y + y - 1) * s.x + x, v});
        if (x > 0) out.push_back({2 * n + v, (z * s.y + y) * s.x + x - 1, v});
      }
  return out;
}

// Maximin edge of every voxel pair by bisection on the edge rank with BFS
// connectivity checks. Ranks order edges by affinity descending, then flat id.
struct PairMaximin {
  std::vector<GridEdgeRef> ranked;           // rank -> edge
  std::vector<std::vector<std::int64_t>> mm; // [u][v] -> rank, -1 if disconnected or u == v
};

inline PairMaximin pairwise_maximin(const AffinityVolume& sort_aff) {
  const Shape3& s = sort_aff.shape;
  const auto n = s.voxels();
  PairMaximin out;
  out.ranked = enumerate_edges_by_coords(s);
  std::sort(out.ranked.begin(), out.ranked.end(), [&](const GridEdgeRef& a, const GridEdgeRef& b) {
    const float fa = sort_aff.data[a.flat], fb = sort_aff.data[b.flat];
    return fa != fb ? fa > fb : a.flat < b.flat;
  });
  auto connected_within = [&](std::uint64_t src, std::size_t max_rank) {
    std::vector<std::vector<std::uint64_t>> adj(n);
    for (std::size_t r = 0; r <= max_rank && r < out.ranked.size(); ++r) {
      adj[out.ranked[r].u].push_back(out.ranked[r].v);
      adj[out.ranked[r].v].push_back(out.ranked[r].u);
    }
    std::vector<bool> seen(n, false);
    std::queue<std::uint64_t> q;
    q.push(src);
    seen[src] = true;
    while (!q.empty()) {
      auto x = q.front();
      q.pop();
      for (auto y : adj[x])
        if (!seen[y]) {
          seen[y] = true;
          q.push(y);
        }
    }
    return seen;
  };
  out.mm.assign(n, std::vector<std::int64_t>(n, -1));
  const auto m = out.ranked.size();
  if (m == 0) return out;
  for (std::uint64_t u = 0; u < n; ++u) {
    const auto all = connected_within(u, m - 1);
    for (std::uint64_t v = u + 1; v < n; ++v) {
      if (!all[v]) continue;
      std::size_t lo = 0, hi = m - 1;
      while (lo < hi) {
        const auto mid = (lo + hi) / 2;
        if (connected_within(u, mid)[v]) hi = mid;
        else lo = mid + 1;
      }
      out.mm[u][v] = out.mm[v][u] = static_cast<std::int64_t>(lo);
    }
  }
  return out;
}

// Total weight of a maximum spanning forest via Prim's algorithm.
inline double max_spanning_forest_weight(const AffinityVolume& aff) {
  const Shape3& s = aff.shape;
  const auto n = s.voxels();
  std::vector<std::vector<std::pair<std::uint64_t, double>>> adj(n);
  for (const auto& e : enumerate_edges_by_coords(s)) {
    adj[e.u].emplace_back(e.v, aff.data[e.flat]);
    adj[e.v].emplace_back(e.u, aff.data[e.flat]);
  }
  std::vector<bool> in(n, false);
  double total = 0.0;
  for (std::uint64_t root = 0; root < n; ++root) {
    if (in[root]) continue;
    std::priority_queue<std::pair<double, std::uint64_t>> pq;
    pq.emplace(-1.0, root);
    bool first = true;
    while (!pq.empty()) {
      auto [w, x] = pq.top();
      pq.pop();
      if (in[x]) continue;
      in[x] = true;
      if (!first) total += w;
      first = false;
      for (auto [y, wy] : adj[x])
        if (!in[y]) pq.emplace(wy, y);
    }
  }
  return total;
}

// O(n^2) squared Euclidean distance to the nearest zero voxel.
inline std::vector<double> brute_force_sq_edt(const Volume<std::uint8_t>& mask, bool in_plane) {
  const Shape3& s = mask.shape;
  const auto n = s.voxels();
  std::vector<double> out(n, 0.0);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!mask.data[i]) continue;
    const auto ci = coord_of(s, i);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t j = 0; j < n; ++j) {
      if (mask.data[j]) continue;
      const auto cj = coord_of(s, j);
      if (in_plane && ci.z != cj.z) continue;
      const double dz = double(ci.z) - double(cj.z), dy = double(ci.y) - double(cj.y), dx = double(ci.x) - double(cj.x);
      best = std::min(best, dz * dz + dy * dy + dx * dx);
    }
    out[i] = best;
  }
  return out;
}

// Partition of fragment labels after replaying every record.
inline std::map<Label, Label> replay_partition(const MergeHistory& h) {
  std::map<Label, Label> parent;
  auto find = [&](Label l) {
    while (parent.count(l) && parent[l] != l) l = parent[l];
    return l;
  };
  for (const auto& r : h) {
    parent.try_emplace(r.survivor, r.survivor);
    parent.try_emplace(r.absorbed, r.absorbed);
    parent[find(r.absorbed)] = find(r.survivor);
  }
  std::map<Label, Label> out;
  for (const auto& [l, p] : parent) out[l] = find(l);
  return out;
}

// True if every segment of `fine` lies inside one segment of `coarse`.
inline bool refines(const LabelVolume& fine, const LabelVolume& coarse) {
  std::map<Label, Label> image;
  for (std::size_t i = 0; i < fine.data.size(); ++i) {
    auto [it, fresh] = image.try_emplace(fine.data[i], coarse.data[i]);
    if (!fresh && it->second != coarse.data[i]) return false;
  }
  return true;
}

// Each nonzero segment lies within a single ground-truth label.
inline bool no_merge_errors(const LabelVolume& seg, const LabelVolume& gt) {
  std::map<Label, Label> image;
  for (std::size_t i = 0; i < seg.data.size(); ++i) {
    if (seg.data[i] == 0) continue;
    auto [it, fresh] = image.try_emplace(seg.data[i], gt.data[i]);
    if (!fresh && it->second != gt.data[i]) return false;
  }
  return true;
}

} // namespace mala::testing
