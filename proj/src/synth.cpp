#include "mala/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace mala {
namespace {

std::uint64_t mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

} // namespace

std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix(mix(seed ^ (stream * 0x9e3779b97f4a7c15ULL)) + index * 0xd1b54a32d192ed03ULL);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return static_cast<double>(counter_draw(seed, stream, index) >> 11) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double u1 = 1.0 - counter_uniform(seed, stream, 2 * index);
  const double u2 = counter_uniform(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void SynthSpec::validate() const {
  shape.validate();
  if (n_regions < 1) throw Error("n_regions must be >= 1");
  if (n_regions > shape.voxels()) throw Error("more regions than voxels");
  if (!(noise_sigma >= 0.0)) throw Error("noise_sigma must be >= 0");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw Error("flip_prob must lie in [0,1]");
}

LabelVolume voronoi_labels(const Shape3& shape, const std::vector<Coord>& sites) {
  shape.validate();
  if (sites.empty()) throw Error("at least one Voronoi site is required");
  LabelVolume out(shape);
  for (std::uint64_t i = 0; i < shape.voxels(); ++i) {
    const Coord c = coord_of(shape, i);
    std::uint64_t best = 0;
    std::int64_t best_d = -1;
    for (std::size_t k = 0; k < sites.size(); ++k) {
      const auto dz = static_cast<std::int64_t>(c.z) - static_cast<std::int64_t>(sites[k].z);
      const auto dy = static_cast<std::int64_t>(c.y) - static_cast<std::int64_t>(sites[k].y);
      const auto dx = static_cast<std::int64_t>(c.x) - static_cast<std::int64_t>(sites[k].x);
      const auto d = dz * dz + dy * dy + dx * dx;
      if (best_d < 0 || d < best_d) {
        best_d = d;
        best = k;
      }
    }
    out.data[i] = best + 1;
  }
  return out;
}

LabelVolume voronoi_labels(const SynthSpec& spec) {
  spec.validate();
  const auto n = spec.shape.voxels();
  std::vector<Coord> sites;
  std::unordered_set<std::uint64_t> taken;
  for (std::uint64_t draw = 0; sites.size() < spec.n_regions; ++draw) {
    const auto v = counter_draw(spec.seed, streams::sites, draw) % n;
    if (taken.insert(v).second) sites.push_back(coord_of(spec.shape, v));
  }
  return voronoi_labels(spec.shape, sites);
}

AffinityVolume affinities_from_labels(const LabelVolume& gt, double noise_sigma, double flip_prob,
                                      std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw Error("noise_sigma must be >= 0");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw Error("flip_prob must lie in [0,1]");
  AffinityVolume aff(gt.shape);
  for_each_edge(gt.shape, [&](std::uint64_t flat, std::uint64_t u, std::uint64_t v) {
    const double base = gt.data[u] != 0 && gt.data[u] == gt.data[v] ? 1.0 : 0.0;
    double a = base;
    if (noise_sigma > 0.0) a += noise_sigma * counter_normal(seed, streams::noise, flat);
    if (flip_prob > 0.0 && counter_uniform(seed, streams::flip, flat) < flip_prob) a = 1.0 - base;
    aff.data[flat] = static_cast<float>(std::clamp(a, 0.0, 1.0));
  });
  return aff;
}

Rag random_rag(std::uint64_t n_edges, std::uint64_t seed, std::uint32_t bins) {
  // Smallest cube whose lattice has at least n_edges edges.
  std::uint64_t side = 2;
  while (3 * side * side * (side - 1) < n_edges) ++side;
  const Shape3 s{side, side, side};
  Rag rag;
  rag.bins = bins;
  // Only nodes touched by the chosen edges are kept; remap after selection.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
  pairs.reserve(n_edges);
  // Voxel-major order keeps the chosen edges in a compact block of the lattice.
  const auto st = strides(s);
  for (std::uint64_t v = 0; v < s.voxels() && pairs.size() < n_edges; ++v)
    for (std::size_t a = 0; a < kAxes && pairs.size() < n_edges; ++a)
      if (has_predecessor(s, v, static_cast<Axis>(a))) pairs.emplace_back(v - st[a], v);
  std::vector<std::int64_t> remap(s.voxels(), -1);
  for (const auto& [u, v] : pairs) remap[u] = remap[v] = 0;
  for (std::uint64_t i = 0; i < s.voxels(); ++i) {
    if (remap[i] < 0) continue;
    remap[i] = static_cast<std::int64_t>(rag.labels.size());
    rag.labels.push_back(i + 1);
    rag.sizes.push_back(1 + counter_draw(seed, streams::rag_sizes, i) % 1000);
  }
  std::sort(pairs.begin(), pairs.end());
  rag.edges.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto bin = static_cast<std::uint32_t>(counter_draw(seed, streams::rag_scores, k) % bins);
    rag.edges.push_back({static_cast<std::uint32_t>(remap[pairs[k].first]),
                         static_cast<std::uint32_t>(remap[pairs[k].second]), ScoreHistogram(bin)});
  }
  return rag;
}

Rag random_graph_rag(std::uint32_t n_nodes, std::uint64_t n_edges, std::uint64_t seed, std::uint32_t bins) {
  if (n_nodes < 2) throw Error("random graph needs at least two nodes");
  Rag rag;
  rag.bins = bins;
  for (std::uint32_t i = 0; i < n_nodes; ++i) {
    rag.labels.push_back(i + 1);
    rag.sizes.push_back(1 + counter_draw(seed, streams::rag_sizes, i) % 50);
  }
  std::vector<std::uint64_t> keys;
  for (std::uint64_t k = 0; k < n_edges; ++k) {
    auto u = static_cast<std::uint32_t>(counter_draw(seed, streams::rag_extra, 2 * k) % n_nodes);
    auto v = static_cast<std::uint32_t>(counter_draw(seed, streams::rag_extra, 2 * k + 1) % n_nodes);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    keys.push_back((std::uint64_t{u} << 32) | v);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  for (std::size_t k = 0; k < keys.size(); ++k) {
    // Few distinct bins so ties and FIFO order matter.
    const auto bin = static_cast<std::uint32_t>(counter_draw(seed, streams::rag_scores, k) % std::min(bins, 16u)) *
                     (bins / std::min(bins, 16u));
    rag.edges.push_back({static_cast<std::uint32_t>(keys[k] >> 32), static_cast<std::uint32_t>(keys[k] & 0xffffffffULL),
                         ScoreHistogram(bin)});
  }
  return rag;
}

} // namespace mala
