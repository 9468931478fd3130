#include "mala/volume.hpp"

#include <cmath>
#include <limits>

namespace mala {

void Shape3::validate() const {
  if (z == 0 || y == 0 || x == 0) throw ShapeMismatch("shape dimensions must be >= 1, got " + str());
  constexpr auto max = std::numeric_limits<std::uint64_t>::max();
  // Edge fields store three channels, so leave room for that too.
  if (y > max / x || z > max / (y * x) || z * y * x > max / kAxes)
    throw ShapeMismatch("shape " + str() + " overflows a 64-bit voxel count");
}

std::string Shape3::str() const {
  return "[" + std::to_string(z) + "," + std::to_string(y) + "," + std::to_string(x) + "]";
}

std::pair<Coord, Coord> edge_endpoints(const EdgeId& e, const Shape3& s) {
  if (e.voxel >= s.voxels() || static_cast<std::size_t>(e.axis) >= kAxes)
    throw Error("edge out of bounds for shape " + s.str());
  if (!has_predecessor(s, e.voxel, e.axis))
    throw Error("edge predecessor lies outside the volume");
  const Coord v = coord_of(s, e.voxel);
  Coord u = v;
  switch (e.axis) {
  case Axis::z: --u.z; break;
  case Axis::y: --u.y; break;
  case Axis::x: --u.x; break;
  }
  return {u, v};
}

std::uint64_t edge_count(const Shape3& s) {
  return (s.z - 1) * s.y * s.x + s.z * (s.y - 1) * s.x + s.z * s.y * (s.x - 1);
}

void validate_affinities(const AffinityVolume& aff) {
  aff.shape.validate();
  const auto n = aff.shape.voxels();
  if (aff.data.size() != kAxes * n) throw ShapeMismatch("affinity data size does not match shape");
  for (std::size_t c = 0; c < kAxes; ++c) {
    for (std::uint64_t v = 0; v < n; ++v) {
      const float a = aff.data[c * n + v];
      if (!(a >= 0.0f && a <= 1.0f)) throw Error("affinity outside [0,1]");
      if (a != 0.0f && !has_predecessor(aff.shape, v, static_cast<Axis>(c)))
        throw Error("nonzero affinity on a face entry");
    }
  }
}

void require_same_shape(const Shape3& a, const Shape3& b, const char* what) {
  if (!(a == b)) throw ShapeMismatch(std::string(what) + ": shape " + a.str() + " vs " + b.str());
}

} // namespace mala
