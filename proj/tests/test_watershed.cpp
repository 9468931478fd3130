#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "mala/synth.hpp"
#include "mala/watershed.hpp"
#include "support/oracles.hpp"

using namespace mala;

namespace {

AffinityVolume uniform_affinities(const Shape3& s, float a) {
  AffinityVolume aff(s);
  for_each_edge(s, [&](std::uint64_t f, std::uint64_t, std::uint64_t) { aff.data[f] = a; });
  return aff;
}

AffinityVolume split_row(std::uint64_t sections) {
  // Each section is a 1x8 row cut between x=3 and x=4.
  AffinityVolume aff(Shape3{sections, 1, 8});
  const std::vector<float> row = {1, 1, 1, 0, 1, 1, 1};
  for (std::uint64_t z = 0; z < sections; ++z) {
    for (std::uint64_t x = 1; x < 8; ++x) aff.at(Axis::x, {z, 0, x}) = row[x - 1];
    if (z > 0)
      for (std::uint64_t x = 0; x < 8; ++x) aff.at(Axis::z, {z, 0, x}) = 1.0f;
  }
  return aff;
}

// Mean incident affinity computed from coordinates.
double oracle_boundary(const AffinityVolume& aff, const Coord& c, bool in_plane) {
  const Shape3& s = aff.shape;
  double sum = 0;
  int deg = 0;
  for (const auto& e : testing::enumerate_edges_by_coords(s)) {
    if (in_plane && e.flat < s.voxels()) continue;
    const auto v = index_of(s, c);
    if (e.u == v || e.v == v) {
      sum += aff.data[e.flat];
      ++deg;
    }
  }
  return deg ? 1.0 - sum / deg : 0.0;
}

bool six_connected_labels(const LabelVolume& l) {
  const Shape3& s = l.shape;
  std::map<Label, std::uint64_t> first;
  for (std::uint64_t i = 0; i < s.voxels(); ++i) first.try_emplace(l.data[i], i);
  std::vector<bool> seen(s.voxels(), false);
  for (const auto& [lab, start] : first) {
    std::vector<std::uint64_t> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (const auto& e : testing::enumerate_edges_by_coords(s)) {
        std::uint64_t w;
        if (e.u == v) w = e.v;
        else if (e.v == v) w = e.u;
        else continue;
        if (!seen[w] && l.data[w] == lab) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

} // namespace

TEST_CASE("boundary_map examples") {
  const Shape3 s{3, 3, 3};
  for (float b : boundary_map(uniform_affinities(s, 1.0f)).data) CHECK(b == 0.0f);
  for (float b : boundary_map(uniform_affinities(s, 0.0f)).data) CHECK(b == 1.0f);

  // Centre voxel: four incident edges at 1, two at 0.
  auto aff = uniform_affinities(s, 1.0f);
  aff.at(Axis::z, {1, 1, 1}) = 0.0f; // edge to (0,1,1)
  aff.at(Axis::x, {1, 1, 2}) = 0.0f; // edge to (1,1,2)
  CHECK(boundary_map(aff).at({1, 1, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  CHECK(boundary_map(AffinityVolume(Shape3{1, 1, 1})).data[0] == 0.0f);
}

TEST_CASE("boundary_map matches a coordinate-walk oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = testing::random_shape(rng, 4);
    const auto aff = testing::random_affinities(s, rng, false);
    for (bool in_plane : {false, true}) {
      const auto b = boundary_map(aff, in_plane);
      for (std::uint64_t i = 0; i < s.voxels(); ++i)
        CHECK(b.data[i] == doctest::Approx(oracle_boundary(aff, coord_of(s, i), in_plane)).epsilon(1e-6));
    }
  }
}

TEST_CASE("squared distance transform matches brute force") {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution inside(0.8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = testing::random_shape(rng, 7);
    Volume<std::uint8_t> mask(s);
    for (auto& m : mask.data) m = inside(rng);
    for (bool in_plane : {false, true}) {
      const auto got = squared_distance_transform(mask, in_plane);
      const auto want = testing::brute_force_sq_edt(mask, in_plane);
      for (std::uint64_t i = 0; i < s.voxels(); ++i) CHECK(got.data[i] == want[i]);
    }
  }
  Volume<std::uint8_t> full(Shape3{2, 3, 4}, 1);
  for (double d : squared_distance_transform(full).data) CHECK(std::isinf(d));
}

TEST_CASE("extract_fragments_3d examples") {
  SUBCASE("all affinities one") {
    const auto f = extract_fragments_3d(uniform_affinities(Shape3{4, 5, 6}, 1.0f));
    for (auto l : f.data) CHECK(l == 1);
  }
  SUBCASE("all affinities zero") {
    const auto f = extract_fragments_3d(uniform_affinities(Shape3{4, 5, 6}, 0.0f));
    for (auto l : f.data) CHECK(l == 0);
  }
  SUBCASE("cut row of eight") {
    const auto f = extract_fragments_3d(split_row(1));
    CHECK(f.data == std::vector<Label>{1, 1, 1, 1, 2, 2, 2, 2});
  }
  SUBCASE("single voxel") {
    CHECK(extract_fragments_3d(AffinityVolume(Shape3{1, 1, 1})).data == std::vector<Label>{1});
  }
}

TEST_CASE("extract_fragments_2d") {
  SUBCASE("two identical sections") {
    const auto f = extract_fragments_2d(split_row(2));
    CHECK(f.data == std::vector<Label>{1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4});
    // The 3D run joins the sections through the z edges.
    const auto f3 = extract_fragments_3d(split_row(2));
    CHECK(std::set<Label>(f3.data.begin(), f3.data.end()).size() == 2);
  }
  SUBCASE("single section reduces to 3D") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const Shape3 s{1, 2 + std::uint64_t(trial % 6), 3 + std::uint64_t(trial % 5)};
      const auto aff = testing::random_affinities(s, rng, false);
      CHECK(extract_fragments_2d(aff) == extract_fragments_3d(aff));
    }
  }
  SUBCASE("all zero") {
    for (auto l : extract_fragments_2d(uniform_affinities(Shape3{3, 4, 4}, 0.0f)).data) CHECK(l == 0);
  }
  SUBCASE("sections ignore z affinities") {
    auto a = split_row(3);
    auto b = a;
    for (std::uint64_t x = 0; x < 8; ++x) b.at(Axis::z, {1, 0, x}) = 0.0f;
    CHECK(extract_fragments_2d(a) == extract_fragments_2d(b));
  }
  CHECK(parse_watershed_mode("2d") == WatershedMode::sections2d);
  CHECK(parse_watershed_mode("3d") == WatershedMode::volume3d);
  CHECK_THROWS_AS(parse_watershed_mode("4d"), Error);
}

TEST_CASE("fragments partition the volume into connected, consecutively numbered pieces") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = testing::random_shape(rng, 6);
    const auto aff = testing::random_affinities(s, rng, false);
    for (auto mode : {WatershedMode::volume3d, WatershedMode::sections2d}) {
      const auto f = extract_fragments(aff, mode);
      std::set<Label> labels(f.data.begin(), f.data.end());
      if (labels.count(0)) {
        // No seed anywhere (or, in 2D, in some section).
        if (mode == WatershedMode::volume3d) CHECK(labels.size() == 1);
        continue;
      }
      CHECK(*labels.rbegin() == labels.size());
      if (mode == WatershedMode::volume3d) CHECK(six_connected_labels(f));
    }
  }
}

TEST_CASE("distance maxima stay inside their fragment") {
  // Independent check: maxima of the brute-force distance map are labelled,
  // and 6-adjacent maxima joined by an uncut edge share one fragment.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = testing::random_shape(rng, 6);
    auto aff = testing::random_affinities(s, rng, false);
    for (auto& a : aff.data) a = a < 0.2f ? 0.0f : 1.0f;
    const auto b = boundary_map(aff);
    Volume<std::uint8_t> mask(s);
    for (std::uint64_t i = 0; i < s.voxels(); ++i) mask.data[i] = b.data[i] < 0.5f;
    for (const auto& e : testing::enumerate_edges_by_coords(s))
      if (aff.data[e.flat] < 0.5f) mask.data[e.u] = mask.data[e.v] = 0;
    const auto d = testing::brute_force_sq_edt(mask, false);
    std::vector<bool> peak(s.voxels(), false);
    for (std::uint64_t i = 0; i < s.voxels(); ++i) {
      if (!mask.data[i]) continue;
      bool p = true;
      const auto c = coord_of(s, i);
      for (std::uint64_t j = 0; j < s.voxels(); ++j) {
        const auto cj = coord_of(s, j);
        const auto near = [](std::uint64_t a, std::uint64_t b) { return a + 1 >= b && b + 1 >= a; };
        if (near(c.z, cj.z) && near(c.y, cj.y) && near(c.x, cj.x) && d[j] > d[i]) p = false;
      }
      peak[i] = p;
    }
    const auto f = extract_fragments_3d(aff);
    for (const auto& e : testing::enumerate_edges_by_coords(s)) {
      if (peak[e.u]) CHECK(f.data[e.u] != 0);
      if (peak[e.u] && peak[e.v] && aff.data[e.flat] >= 0.5f) CHECK(f.data[e.u] == f.data[e.v]);
    }
  }
}

TEST_CASE("clean indicator affinities give an oversegmentation") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SynthSpec spec;
    spec.shape = {4 + seed % 13, 5 + (seed * 7) % 17, 6 + (seed * 3) % 11};
    spec.n_regions = 1 + seed % 10;
    spec.seed = seed;
    const auto gt = voronoi_labels(spec);
    const auto aff = affinities_from_labels(gt, 0.0, 0.0, seed);
    CHECK(testing::no_merge_errors(extract_fragments_3d(aff), gt));
    CHECK(testing::no_merge_errors(extract_fragments_2d(aff), gt));
  }
  // Salt-and-pepper labels: many one-voxel regions.
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = testing::random_shape(rng, 6);
    const auto gt = testing::random_labels(s, rng, 3, false);
    const auto aff = affinities_from_labels(gt, 0.0, 0.0, 0);
    CHECK(testing::no_merge_errors(extract_fragments_3d(aff), gt));
  }
}

TEST_CASE("extraction is deterministic") {
  std::mt19937_64 rng(1);
  const Shape3 s{6, 7, 8};
  const auto aff = testing::random_affinities(s, rng, false);
  CHECK(extract_fragments_3d(aff) == extract_fragments_3d(aff));
  CHECK(extract_fragments_2d(aff) == extract_fragments_2d(aff));
}
