#pragma once

// Seeded watershed fragment extraction from affinities.
//
// Boundary values are 1 - mean incident affinity. Voxels with boundary < 0.5
// that touch no cut edge (affinity < 0.5) form the mask; seeds are the
// plateaus of local maxima of the mask's Euclidean distance transform, and
// basins are flooded from the seeds in ascending order of
// max(boundary, 1 - affinity of the entering edge) until they tile the
// volume. Plateau voxels are joined only through uncut edges, and a voxel
// first reached across a cut edge opens a basin of its own, so on exact
// indicator affinities no fragment crosses a region border.

#include "mala/volume.hpp"

namespace mala {

using BoundaryMap = Volume<float>;
using FragmentVolume = LabelVolume;

enum class WatershedMode { volume3d, sections2d };

WatershedMode parse_watershed_mode(const std::string& name);

inline constexpr float kBoundaryThreshold = 0.5f;

// With in_plane set, only y/x edges contribute to the mean.
BoundaryMap boundary_map(const AffinityVolume& aff, bool in_plane = false);

// Squared Euclidean distance from each nonzero voxel to the nearest zero
// voxel (0 on zero voxels, +inf if there is none). In-plane mode treats
// every z-section independently.
Volume<double> squared_distance_transform(const Volume<std::uint8_t>& mask, bool in_plane = false);

FragmentVolume extract_fragments_3d(const AffinityVolume& aff);
// Per-section extraction with x/y affinities only; labels are offset by the
// fragment counts of the preceding sections.
FragmentVolume extract_fragments_2d(const AffinityVolume& aff);

FragmentVolume extract_fragments(const AffinityVolume& aff, WatershedMode mode);

} // namespace mala
