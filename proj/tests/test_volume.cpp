#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "mala/vgrid.hpp"
#include "support/oracles.hpp"

using namespace mala;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / ("mala_test_volume_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

VgridError::Kind read_error_kind(const fs::path& p) {
  try {
    read_volume(p);
  } catch (const VgridError& e) {
    return e.kind();
  }
  FAIL("expected a VgridError");
  return VgridError::Kind::io;
}

} // namespace

TEST_CASE("edge_endpoints follows the predecessor convention") {
  const Shape3 s{2, 2, 2};
  auto [a, b] = edge_endpoints({index_of(s, {0, 0, 1}), Axis::x}, s);
  CHECK(a == Coord{0, 0, 0});
  CHECK(b == Coord{0, 0, 1});
  std::tie(a, b) = edge_endpoints({index_of(s, {1, 0, 0}), Axis::z}, s);
  CHECK(a == Coord{0, 0, 0});
  CHECK(b == Coord{1, 0, 0});
  CHECK_THROWS_AS(edge_endpoints({index_of(s, {0, 0, 0}), Axis::x}, s), Error);
  CHECK_THROWS_AS(edge_endpoints({s.voxels(), Axis::x}, s), Error);
}

TEST_CASE("flat edge ids round-trip") {
  const Shape3 s{3, 4, 5};
  for (std::uint64_t f = 0; f < 3 * s.voxels(); ++f) CHECK(EdgeId::from_flat(s, f).flat(s) == f);
}

TEST_CASE("edge count matches exhaustive enumeration") {
  for (std::uint64_t z = 1; z <= 4; ++z)
    for (std::uint64_t y = 1; y <= 4; ++y)
      for (std::uint64_t x = 1; x <= 4; ++x) {
        const Shape3 s{z, y, x};
        const auto expected = testing::enumerate_edges_by_coords(s);
        std::vector<std::uint64_t> seen;
        for_each_edge(s, [&](std::uint64_t flat, std::uint64_t u, std::uint64_t v) {
          seen.push_back(flat);
          auto [cu, cv] = edge_endpoints(EdgeId::from_flat(s, flat), s);
          CHECK(index_of(s, cu) == u);
          CHECK(index_of(s, cv) == v);
        });
        CHECK(seen.size() == expected.size());
        CHECK(edge_count(s) == expected.size());
        CHECK(std::is_sorted(seen.begin(), seen.end()));
      }
}

TEST_CASE("shape validation") {
  CHECK_THROWS_AS((Shape3{0, 1, 1}.validate()), ShapeMismatch);
  CHECK_THROWS_AS((Shape3{1ULL << 40, 1ULL << 40, 1}.validate()), ShapeMismatch);
  CHECK_NOTHROW((Shape3{1, 1, 1}.validate()));
  CHECK_THROWS_AS(LabelVolume(Shape3{2, 2, 2}, std::vector<Label>(7)), ShapeMismatch);
}

TEST_CASE("affinity validation rejects out-of-range and face entries") {
  AffinityVolume aff(Shape3{1, 1, 3});
  aff.at(Axis::x, {0, 0, 1}) = 0.5f;
  CHECK_NOTHROW(validate_affinities(aff));
  aff.at(Axis::x, {0, 0, 1}) = 1.5f;
  CHECK_THROWS_AS(validate_affinities(aff), Error);
  aff.at(Axis::x, {0, 0, 1}) = 0.5f;
  aff.at(Axis::x, {0, 0, 0}) = 0.5f; // predecessor outside the volume
  CHECK_THROWS_AS(validate_affinities(aff), Error);
}

TEST_CASE("vgrid round trip and exact header bytes") {
  const auto dir = temp_dir();
  SUBCASE("2x2x2 zeros") {
    LabelVolume zeros(Shape3{2, 2, 2});
    write_volume(zeros, dir / "zeros");
    CHECK(read_labels(dir / "zeros") == zeros);
    CHECK(slurp(dir / "zeros.json") == "{\"magic\":\"vgrid1\",\"kind\":\"labels\",\"dtype\":\"u64\",\"shape\":[2,2,2]}\n");
    CHECK(fs::file_size(dir / "zeros.bin") == 8 * 8);
  }
  SUBCASE("affinities header [3,2,2,2] with 24 floats") {
    AffinityVolume aff(Shape3{2, 2, 2});
    std::mt19937_64 rng(1);
    aff = testing::random_affinities(aff.shape, rng);
    write_volume(aff, dir / "aff.json");
    CHECK(slurp(dir / "aff.json") ==
          "{\"magic\":\"vgrid1\",\"kind\":\"affinities\",\"dtype\":\"f32\",\"shape\":[3,2,2,2]}\n");
    CHECK(fs::file_size(dir / "aff.bin") == 24 * 4);
    const auto back = read_volume(dir / "aff.bin");
    REQUIRE(std::holds_alternative<AffinityVolume>(back));
    CHECK(std::get<AffinityVolume>(back) == aff);
  }
  SUBCASE("random volumes are bitwise identical after write/read") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = testing::random_shape(rng, 5);
      LabelVolume l(s);
      for (auto& v : l.data) v = rng();
      write_volume(l, dir / "l");
      CHECK(read_labels(dir / "l") == l);
      AffinityVolume a(s);
      std::uniform_real_distribution<float> u(0.0f, 1.0f);
      for (auto& v : a.data) v = u(rng);
      write_volume(a, dir / "a");
      const auto b = read_affinities(dir / "a");
      CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("vgrid errors are distinct") {
  const auto dir = temp_dir();
  LabelVolume vol(Shape3{2, 2, 2});
  write_volume(vol, dir / "v");

  SUBCASE("truncated payload") {
    fs::resize_file(dir / "v.bin", 8 * 7);
    CHECK(read_error_kind(dir / "v") == VgridError::Kind::truncated);
  }
  SUBCASE("trailing data") {
    std::ofstream(dir / "v.bin", std::ios::app | std::ios::binary) << 'x';
    CHECK(read_error_kind(dir / "v") == VgridError::Kind::trailing_data);
  }
  SUBCASE("bad magic") {
    std::ofstream(dir / "v.json") << R"({"magic":"vgrid0","kind":"labels","dtype":"u64","shape":[2,2,2]})";
    CHECK(read_error_kind(dir / "v") == VgridError::Kind::bad_magic);
  }
  SUBCASE("dtype mismatch") {
    std::ofstream(dir / "v.json") << R"({"magic":"vgrid1","kind":"labels","dtype":"f32","shape":[2,2,2]})";
    CHECK(read_error_kind(dir / "v") == VgridError::Kind::dtype_mismatch);
  }
  SUBCASE("shape mismatch") {
    std::ofstream(dir / "v.json") << R"({"magic":"vgrid1","kind":"affinities","dtype":"f32","shape":[2,2,2]})";
    CHECK(read_error_kind(dir / "v") == VgridError::Kind::shape_mismatch);
    std::ofstream(dir / "v.json") << R"({"magic":"vgrid1","kind":"labels","dtype":"u64","shape":[0,2,2]})";
    CHECK(read_error_kind(dir / "v") == VgridError::Kind::shape_mismatch);
  }
  SUBCASE("kind requested does not match") {
    CHECK_THROWS_AS(read_affinities(dir / "v"), VgridError);
  }
  SUBCASE("missing file") {
    CHECK(read_error_kind(dir / "nope") == VgridError::Kind::io);
  }
  fs::remove_all(dir);
}
