#pragma once

// Deterministic synthetic ground truth, affinities and random RAGs.
//
// Randomness comes from a counter-based generator so every value depends only
// on (seed, stream, index):
//
//   mix(z)  = SplitMix64 finaliser: z ^= z>>30; z *= 0xbf58476d1ce4e5b9;
//             z ^= z>>27; z *= 0x94d049bb133111eb; z ^= z>>31
//   draw(seed, stream, i) = mix(mix(seed ^ (stream * 0x9e3779b97f4a7c15))
//                               + i * 0xd1b54a32d192ed03)
//   uniform = (draw >> 11) * 2^-53                      in [0,1)
//   normal  = sqrt(-2 ln(1 - u(2i))) * cos(2 pi u(2i+1))  (Box-Muller)

#include <cstdint>
#include <vector>

#include "mala/agglomerate.hpp"
#include "mala/volume.hpp"

namespace mala {

namespace streams {
inline constexpr std::uint64_t sites = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t flip = 3;
inline constexpr std::uint64_t rag_scores = 4;
inline constexpr std::uint64_t rag_sizes = 5;
inline constexpr std::uint64_t rag_extra = 6;
} // namespace streams

std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);
double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

struct SynthSpec {
  Shape3 shape{32, 32, 32};
  std::uint64_t n_regions = 8;
  double noise_sigma = 0.0;
  double flip_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Labels 1..n_regions by nearest site (ties: smaller site index). Sites are
// distinct voxels drawn from the `sites` stream.
LabelVolume voronoi_labels(const SynthSpec& spec);
LabelVolume voronoi_labels(const Shape3& shape, const std::vector<Coord>& sites);

// 1 between voxels sharing a nonzero label, else 0; plus N(0, sigma) noise,
// then replaced by 1 - base with probability flip_prob, clamped to [0,1].
AffinityVolume affinities_from_labels(const LabelVolume& gt, double noise_sigma, double flip_prob,
                                      std::uint64_t seed);

// Random RAG on a cubic lattice of nodes with ~n_edges edges (6-connected),
// uniform initial scores and random node sizes.
Rag random_rag(std::uint64_t n_edges, std::uint64_t seed, std::uint32_t bins = kDefaultBins);

// Random RAG with arbitrary (non-lattice) topology: n_nodes nodes, up to
// n_edges distinct random pairs. Stresses high-degree fusions.
Rag random_graph_rag(std::uint32_t n_nodes, std::uint64_t n_edges, std::uint64_t seed,
                     std::uint32_t bins = kDefaultBins);

} // namespace mala
