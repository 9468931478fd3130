#include "mala/watershed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace mala {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher lower envelope along one line.
void edt_line(double* f, std::size_t n, std::size_t stride, std::vector<double>& line,
              std::vector<std::size_t>& v, std::vector<double>& z) {
  line.resize(n);
  v.resize(n);
  z.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) line[i] = f[i * stride];
  std::ptrdiff_t k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (line[q] == kInf) continue;
    const double fq = line[q] + static_cast<double>(q * q);
    double s = -kInf;
    while (k >= 0) {
      const auto p = v[k];
      s = (fq - (line[p] + static_cast<double>(p * p))) / (2.0 * static_cast<double>(q) - 2.0 * static_cast<double>(p));
      if (s <= z[k]) --k;
      else break;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : s;
    z[k + 1] = kInf;
  }
  if (k < 0) return; // no finite sites: line stays +inf
  std::size_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const double d = static_cast<double>(q) - static_cast<double>(v[j]);
    f[q * stride] = d * d + line[v[j]];
  }
}

// Neighbour offsets (dz,dy,dx) of the 26-neighbourhood.
std::vector<std::tuple<int, int, int>> full_neighbourhood() {
  std::vector<std::tuple<int, int, int>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dz || dy || dx) out.emplace_back(dz, dy, dx);
  return out;
}

template <typename Fn>
void for_each_neighbour(const Shape3& s, const Coord& c, const std::vector<std::tuple<int, int, int>>& offsets,
                        Fn&& fn) {
  for (const auto& [dz, dy, dx] : offsets) {
    const auto z = static_cast<std::int64_t>(c.z) + dz;
    const auto y = static_cast<std::int64_t>(c.y) + dy;
    const auto x = static_cast<std::int64_t>(c.x) + dx;
    if (z < 0 || y < 0 || x < 0 || z >= static_cast<std::int64_t>(s.z) || y >= static_cast<std::int64_t>(s.y) ||
        x >= static_cast<std::int64_t>(s.x))
      continue;
    fn(index_of(s, {static_cast<std::uint64_t>(z), static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(x)}));
  }
}

// Edge affinities by axis for one block; a null channel counts as absent.
struct Channels {
  const float* axis[kAxes];
};

// True if some axis-monotone 6-path between 26-neighbours a and b crosses
// only edges at or above the threshold.
bool uncut_path(const Channels& aff, const Shape3& s, std::uint64_t a, std::uint64_t b) {
  const auto st = strides(s);
  const Coord ca = coord_of(s, a), cb = coord_of(s, b);
  const std::uint64_t pa[kAxes] = {ca.z, ca.y, ca.x}, pb[kAxes] = {cb.z, cb.y, cb.x};
  std::array<std::size_t, kAxes> axes{};
  std::size_t m = 0;
  for (std::size_t k = 0; k < kAxes; ++k)
    if (pa[k] != pb[k]) axes[m++] = k;
  std::sort(axes.begin(), axes.begin() + m);
  do {
    std::uint64_t v = a;
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      const auto k = axes[i];
      const auto w = pb[k] > pa[k] ? v + st[k] : v - st[k];
      const float e = aff.axis[k] ? aff.axis[k][std::max(v, w)] : 0.0f;
      ok = e >= kBoundaryThreshold;
      v = w;
    }
    if (ok) return true;
  } while (std::next_permutation(axes.begin(), axes.begin() + m));
  return false;
}

// Watershed of one boundary map; returns labels 1..count in seed order.
std::vector<Label> flood(const float* boundary, const Channels& aff, const Shape3& s, std::uint64_t& count) {
  const auto n = s.voxels();
  const auto st = strides(s);
  const std::uint64_t dims[kAxes] = {s.z, s.y, s.x};

  // Mask voxels sit below the boundary threshold and touch no cut edge.
  Volume<std::uint8_t> mask(s);
  for (std::uint64_t i = 0; i < n; ++i) mask.data[i] = boundary[i] < kBoundaryThreshold ? 1 : 0;
  for (std::size_t a = 0; a < kAxes; ++a) {
    if (!aff.axis[a]) continue;
    for (std::uint64_t v = 0; v < n; ++v) {
      if (!has_predecessor(s, v, static_cast<Axis>(a)) || aff.axis[a][v] >= kBoundaryThreshold) continue;
      mask.data[v] = 0;
      mask.data[v - st[a]] = 0;
    }
  }
  const auto dist = squared_distance_transform(mask);

  static const auto neighbourhood = full_neighbourhood();
  std::vector<std::uint8_t> is_max(n, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!mask.data[i]) continue;
    bool peak = true;
    for_each_neighbour(s, coord_of(s, i), neighbourhood, [&](std::uint64_t j) {
      if (dist.data[j] > dist.data[i]) peak = false;
    });
    is_max[i] = peak ? 1 : 0;
  }

  std::vector<Label> labels(n, 0);
  count = 0;
  // Plateaus: connected components of the maxima, numbered in scan order.
  std::vector<std::uint64_t> stack;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!is_max[i] || labels[i]) continue;
    const Label l = ++count;
    labels[i] = l;
    stack.push_back(i);
    while (!stack.empty()) {
      const auto cur = stack.back();
      stack.pop_back();
      for_each_neighbour(s, coord_of(s, cur), neighbourhood, [&](std::uint64_t j) {
        if (is_max[j] && !labels[j] && uncut_path(aff, s, cur, j)) {
          labels[j] = l;
          stack.push_back(j);
        }
      });
    }
  }
  if (count == 0) return labels;

  // Priority flood: entering w from v costs max(boundary(w), 1 - aff(v,w)).
  // Labels are fixed on pop; ties resolve first-in first-out. A voxel first
  // reached across a cut edge (affinity below threshold) opens a new basin.
  using Item = std::tuple<float, std::uint64_t, std::uint64_t, Label>; // priority, sequence, voxel, label
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  std::uint64_t seq = 0;
  for (std::uint64_t i = 0; i < n; ++i)
    if (labels[i]) heap.emplace(boundary[i], seq++, i, labels[i]);
  std::vector<std::uint8_t> done(n, 0);
  auto enter = [&](std::uint64_t w, float edge_aff, Label l) {
    if (labels[w]) return;
    heap.emplace(std::max(boundary[w], 1.0f - edge_aff), seq++, w, edge_aff < kBoundaryThreshold ? 0 : l);
  };
  while (!heap.empty()) {
    auto [p, q, v, l] = heap.top();
    heap.pop();
    if (done[v]) continue;
    done[v] = 1;
    if (!labels[v]) labels[v] = l ? l : ++count;
    l = labels[v];
    const Coord c = coord_of(s, v);
    const std::uint64_t pos[kAxes] = {c.z, c.y, c.x};
    for (std::size_t a = 0; a < kAxes; ++a) {
      if (pos[a] > 0) enter(v - st[a], aff.axis[a] ? aff.axis[a][v] : 0.0f, l);
      if (pos[a] + 1 < dims[a]) enter(v + st[a], aff.axis[a] ? aff.axis[a][v + st[a]] : 0.0f, l);
    }
  }
  return labels;
}

} // namespace

WatershedMode parse_watershed_mode(const std::string& name) {
  if (name == "3d") return WatershedMode::volume3d;
  if (name == "2d") return WatershedMode::sections2d;
  throw Error("unknown watershed mode '" + name + "' (expected 3d or 2d)");
}

BoundaryMap boundary_map(const AffinityVolume& aff, bool in_plane) {
  const Shape3& s = aff.shape;
  const auto n = s.voxels();
  std::vector<double> sum(n, 0.0);
  std::vector<std::uint32_t> degree(n, 0);
  for_each_edge(s, [&](std::uint64_t flat, std::uint64_t u, std::uint64_t v) {
    if (in_plane && flat < n) return; // z channel
    const double a = aff.data[flat];
    sum[u] += a;
    sum[v] += a;
    ++degree[u];
    ++degree[v];
  });
  BoundaryMap b(s);
  // A voxel without incident edges carries no boundary evidence.
  for (std::uint64_t i = 0; i < n; ++i)
    b.data[i] = degree[i] ? static_cast<float>(1.0 - sum[i] / degree[i]) : 0.0f;
  return b;
}

Volume<double> squared_distance_transform(const Volume<std::uint8_t>& mask, bool in_plane) {
  const Shape3& s = mask.shape;
  Volume<double> d(s);
  for (std::uint64_t i = 0; i < s.voxels(); ++i) d.data[i] = mask.data[i] ? kInf : 0.0;
  std::vector<double> line, z;
  std::vector<std::size_t> v;
  for (std::uint64_t zz = 0; zz < s.z; ++zz)
    for (std::uint64_t y = 0; y < s.y; ++y)
      edt_line(&d.data[index_of(s, {zz, y, 0})], s.x, 1, line, v, z);
  for (std::uint64_t zz = 0; zz < s.z; ++zz)
    for (std::uint64_t x = 0; x < s.x; ++x)
      edt_line(&d.data[index_of(s, {zz, 0, x})], s.y, s.x, line, v, z);
  if (!in_plane) {
    for (std::uint64_t y = 0; y < s.y; ++y)
      for (std::uint64_t x = 0; x < s.x; ++x)
        edt_line(&d.data[index_of(s, {0, y, x})], s.z, s.y * s.x, line, v, z);
  }
  return d;
}

FragmentVolume extract_fragments_3d(const AffinityVolume& aff) {
  const auto b = boundary_map(aff);
  const auto n = aff.shape.voxels();
  const Channels ch{{aff.data.data(), aff.data.data() + n, aff.data.data() + 2 * n}};
  std::uint64_t count = 0;
  return FragmentVolume(aff.shape, flood(b.data.data(), ch, aff.shape, count));
}

FragmentVolume extract_fragments_2d(const AffinityVolume& aff) {
  const Shape3& s = aff.shape;
  const auto b = boundary_map(aff, true);
  const Shape3 section{1, s.y, s.x};
  const auto per = section.voxels();
  FragmentVolume out(s);
  // Sections are independent; each one's labels are shifted past all earlier ones.
  Label offset = 0;
  for (std::uint64_t z = 0; z < s.z; ++z) {
    std::uint64_t count = 0;
    const Channels ch{{nullptr, aff.data.data() + s.voxels() + z * per, aff.data.data() + 2 * s.voxels() + z * per}};
    const auto labels = flood(b.data.data() + z * per, ch, section, count);
    for (std::uint64_t i = 0; i < per; ++i) out.data[z * per + i] = labels[i] ? labels[i] + offset : 0;
    offset += count;
  }
  return out;
}

FragmentVolume extract_fragments(const AffinityVolume& aff, WatershedMode mode) {
  return mode == WatershedMode::volume3d ? extract_fragments_3d(aff) : extract_fragments_2d(aff);
}

} // namespace mala
