#pragma once

// Dense voxel volumes and the 6-connected edge convention.
//
// Affinities are stored with the "predecessor" convention: channel c at voxel
// (z,y,x) holds the affinity of the edge between that voxel and its
// predecessor along axis c ((z-1,y,x) for c=0, (z,y-1,x) for c=1,
// (z,y,x-1) for c=2). Entries whose predecessor lies outside the volume are
// inert and always 0. Layout is C-order with x fastest; for edge fields the
// channel is the slowest dimension.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mala {

using Label = std::uint64_t;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
public:
  using Error::Error;
};

struct Shape3 {
  std::uint64_t z = 1;
  std::uint64_t y = 1;
  std::uint64_t x = 1;

  std::uint64_t voxels() const { return z * y * x; }
  bool operator==(const Shape3&) const = default;

  // Throws if any dimension is zero or the voxel count overflows.
  void validate() const;
  std::string str() const;
};

struct Coord {
  std::uint64_t z = 0;
  std::uint64_t y = 0;
  std::uint64_t x = 0;
  bool operator==(const Coord&) const = default;
};

enum class Axis : std::uint8_t { z = 0, y = 1, x = 2 };

inline constexpr std::size_t kAxes = 3;

inline std::uint64_t index_of(const Shape3& s, const Coord& c) {
  return (c.z * s.y + c.y) * s.x + c.x;
}

inline Coord coord_of(const Shape3& s, std::uint64_t index) {
  Coord c;
  c.x = index % s.x;
  index /= s.x;
  c.y = index % s.y;
  c.z = index / s.y;
  return c;
}

// Voxel-index stride along each axis.
inline std::array<std::uint64_t, kAxes> strides(const Shape3& s) {
  return {s.y * s.x, s.x, 1};
}

// One stored affinity entry: the edge from `voxel` to its predecessor along
// `axis`. The flat id (axis * voxels + voxel) matches the payload layout and
// defines the canonical edge order.
struct EdgeId {
  std::uint64_t voxel = 0;
  Axis axis = Axis::z;

  std::uint64_t flat(const Shape3& s) const {
    return static_cast<std::uint64_t>(axis) * s.voxels() + voxel;
  }
  static EdgeId from_flat(const Shape3& s, std::uint64_t flat) {
    return {flat % s.voxels(), static_cast<Axis>(flat / s.voxels())};
  }
  bool operator==(const EdgeId&) const = default;
};

// True if the predecessor of `voxel` along `axis` is inside the volume.
inline bool has_predecessor(const Shape3& s, std::uint64_t voxel, Axis axis) {
  switch (axis) {
  case Axis::z: return voxel >= s.y * s.x;
  case Axis::y: return (voxel / s.x) % s.y != 0;
  case Axis::x: return voxel % s.x != 0;
  }
  return false;
}

// (predecessor, voxel) joined by edge e. Throws if e is out of bounds or its
// predecessor lies outside the volume.
std::pair<Coord, Coord> edge_endpoints(const EdgeId& e, const Shape3& s);

// Number of in-bounds grid edges: (Z-1)YX + Z(Y-1)X + ZY(X-1).
std::uint64_t edge_count(const Shape3& s);

// Calls fn(flat_id, u, v) for every valid edge in ascending flat-id order,
// with u the predecessor voxel index and v the voxel index.
template <typename Fn>
void for_each_edge(const Shape3& s, Fn&& fn) {
  const auto n = s.voxels();
  const auto st = strides(s);
  for (std::size_t c = 0; c < kAxes; ++c) {
    const auto axis = static_cast<Axis>(c);
    const std::uint64_t base = c * n;
    for (std::uint64_t v = 0; v < n; ++v) {
      if (has_predecessor(s, v, axis)) fn(base + v, v - st[c], v);
    }
  }
}

template <typename T>
struct Volume {
  Shape3 shape;
  std::vector<T> data;

  Volume() = default;
  explicit Volume(const Shape3& s, T fill = T{})
      : shape(s), data((s.validate(), s.voxels()), fill) {}
  Volume(const Shape3& s, std::vector<T> values) : shape(s), data(std::move(values)) {
    shape.validate();
    if (data.size() != shape.voxels())
      throw ShapeMismatch("volume data size does not match shape " + shape.str());
  }

  T& operator[](std::uint64_t i) { return data[i]; }
  const T& operator[](std::uint64_t i) const { return data[i]; }
  T& at(const Coord& c) { return data[index_of(shape, c)]; }
  const T& at(const Coord& c) const { return data[index_of(shape, c)]; }
  bool operator==(const Volume&) const = default;
};

// Three channels of per-edge values over a voxel grid.
template <typename T>
struct EdgeField {
  Shape3 shape;
  std::vector<T> data;

  EdgeField() = default;
  explicit EdgeField(const Shape3& s, T fill = T{})
      : shape(s), data((s.validate(), kAxes * s.voxels()), fill) {}
  EdgeField(const Shape3& s, std::vector<T> values) : shape(s), data(std::move(values)) {
    shape.validate();
    if (data.size() != kAxes * shape.voxels())
      throw ShapeMismatch("edge field size does not match shape " + shape.str());
  }

  T& operator[](std::uint64_t flat) { return data[flat]; }
  const T& operator[](std::uint64_t flat) const { return data[flat]; }
  T& at(const EdgeId& e) { return data[e.flat(shape)]; }
  const T& at(const EdgeId& e) const { return data[e.flat(shape)]; }
  T& at(Axis a, const Coord& c) {
    return data[static_cast<std::uint64_t>(a) * shape.voxels() + index_of(shape, c)];
  }
  const T& at(Axis a, const Coord& c) const {
    return data[static_cast<std::uint64_t>(a) * shape.voxels() + index_of(shape, c)];
  }
  bool operator==(const EdgeField&) const = default;
};

using LabelVolume = Volume<Label>;
using AffinityVolume = EdgeField<float>;
using GradientVolume = EdgeField<double>;

// Checks that every stored affinity lies in [0,1] and face entries are 0.
void validate_affinities(const AffinityVolume& aff);

void require_same_shape(const Shape3& a, const Shape3& b, const char* what);

} // namespace mala
