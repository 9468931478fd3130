#pragma once

// Constrained MALIS loss over a 6-connected affinity graph.
//
// For every voxel pair the maximin edge is the edge whose affinity is the
// highest threshold at which the pair is still connected. All maximin edges
// lie on a maximal spanning forest, so a single Kruskal sweep that tracks
// per-component ground-truth label counts yields the loss and its dense
// gradient in O(n log n).
//
// Pairs with at least one background (label 0) voxel never contribute loss;
// background voxels still take part in connectivity. Equal affinities are
// ordered by ascending flat edge id.

#include <cstdint>
#include <string>
#include <vector>

#include "mala/volume.hpp"

namespace mala {

enum class MalisPass {
  positive,      // between-region and background edges clamped to 0; same-label pairs only
  negative,      // same-label edges clamped to 1; different-label pairs only
  unconstrained, // original affinities; all labelled pairs
};

const char* to_string(MalisPass pass);
MalisPass parse_malis_pass(const std::string& name);

struct MaximinRecord {
  EdgeId edge;
  float affinity = 0.0f;
  std::uint64_t pos_pairs = 0;
  std::uint64_t neg_pairs = 0;
  std::uint64_t background_pairs = 0; // pairs with a background endpoint, excluded from the loss
};

struct MaximinDecomposition {
  // One record per uniting edge, in the order Kruskal added them.
  std::vector<MaximinRecord> records;
};

struct MalisResult {
  double loss = 0.0;
  GradientVolume gradient;
  std::uint64_t pos_pairs = 0;
  std::uint64_t neg_pairs = 0;
};

MaximinDecomposition maximin_decompose(const AffinityVolume& aff, const LabelVolume& gt);

// Copy of `aff` with the pass's clamping applied (identity for unconstrained).
AffinityVolume constrain_affinities(const AffinityVolume& aff, const LabelVolume& gt, MalisPass pass);

MalisResult malis_pass(const AffinityVolume& aff, const LabelVolume& gt, MalisPass pass);

// Sum of the positive and negative passes.
MalisResult constrained_malis(const AffinityVolume& aff, const LabelVolume& gt);

inline constexpr std::uint64_t kDefaultOracleLimit = 512;

// Quadratic reference: finds every pair's maximin edge with a minimax path
// search from each voxel. Throws if the volume exceeds `oracle_limit` voxels.
MalisResult brute_force_malis(const AffinityVolume& aff, const LabelVolume& gt, MalisPass pass,
                              std::uint64_t oracle_limit = kDefaultOracleLimit);

} // namespace mala
