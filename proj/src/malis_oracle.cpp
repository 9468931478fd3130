// Quadratic MALIS reference, independent of the Kruskal sweep.

#include <algorithm>
#include <limits>
#include <queue>

#include "mala/malis.hpp"

namespace mala {

MalisResult brute_force_malis(const AffinityVolume& aff, const LabelVolume& gt, MalisPass pass,
                              std::uint64_t oracle_limit) {
  require_same_shape(aff.shape, gt.shape, "brute_force_malis");
  const Shape3& s = aff.shape;
  const auto n = s.voxels();
  if (n > oracle_limit)
    throw Error("volume of " + std::to_string(n) + " voxels exceeds the oracle limit of " +
                std::to_string(oracle_limit));

  struct GridEdge {
    std::uint64_t flat, u, v;
    float key;
  };
  std::vector<GridEdge> edges;
  for_each_edge(s, [&](std::uint64_t flat, std::uint64_t u, std::uint64_t v) {
    const bool same = gt.data[u] != 0 && gt.data[u] == gt.data[v];
    float key = aff.data[flat];
    if (pass == MalisPass::positive && !same) key = 0.0f;
    if (pass == MalisPass::negative && same) key = 1.0f;
    edges.push_back({flat, u, v, key});
  });
  // Rank 0 is the strongest edge; ties go to the smaller flat id.
  std::sort(edges.begin(), edges.end(), [](const GridEdge& a, const GridEdge& b) {
    return a.key != b.key ? a.key > b.key : a.flat < b.flat;
  });

  std::vector<std::vector<std::pair<std::uint64_t, std::size_t>>> adj(n);
  for (std::size_t r = 0; r < edges.size(); ++r) {
    adj[edges[r].u].emplace_back(edges[r].v, r);
    adj[edges[r].v].emplace_back(edges[r].u, r);
  }

  MalisResult out;
  out.gradient = GradientVolume(s);
  constexpr auto unreached = std::numeric_limits<std::size_t>::max();
  // Rank of the worst edge on the best path; the source itself uses `none`.
  constexpr auto none = unreached - 1;

  for (std::uint64_t src = 0; src < n; ++src) {
    // Minimax path search: minimise the largest rank along the path.
    std::vector<std::size_t> bottleneck(n, unreached);
    using Item = std::pair<std::size_t, std::uint64_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    bottleneck[src] = none;
    heap.emplace(0, src);
    std::vector<bool> done(n, false);
    while (!heap.empty()) {
      const auto [b, x] = heap.top();
      heap.pop();
      if (done[x]) continue;
      done[x] = true;
      const std::size_t bx = bottleneck[x] == none ? 0 : bottleneck[x];
      for (const auto& [y, r] : adj[x]) {
        const std::size_t cand = x == src ? r : std::max(bx, r);
        if (!done[y] && (bottleneck[y] == unreached || cand < bottleneck[y])) {
          bottleneck[y] = cand;
          heap.emplace(cand, y);
        }
      }
    }

    for (std::uint64_t dst = src + 1; dst < n; ++dst) {
      if (bottleneck[dst] == unreached) continue;
      const Label a = gt.data[src];
      const Label b = gt.data[dst];
      if (a == 0 || b == 0) continue;
      const bool same = a == b;
      if (same && pass == MalisPass::negative) continue;
      if (!same && pass == MalisPass::positive) continue;
      const auto flat = edges[bottleneck[dst]].flat;
      const double w = aff.data[flat];
      const double target = same ? 1.0 : 0.0;
      out.loss += (target - w) * (target - w);
      out.gradient.data[flat] += -2.0 * (target - w);
      (same ? out.pos_pairs : out.neg_pairs) += 1;
    }
  }
  return out;
}

} // namespace mala
