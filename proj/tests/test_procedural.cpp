#include <doctest.h>

#include <set>

#include "voxelcast/procedural.hpp"

using namespace voxelcast;

namespace {

std::set<std::array<float, 3>> palette(const VoxelGrid& g) {
  std::set<std::array<float, 3>> out;
  for (std::size_t i = 0; i < g.voxel_count(); ++i)
    if (g.occupied(i)) {
      const Color c = g.color(i);
      out.insert({c.x(), c.y(), c.z()});
    }
  return out;
}

}  // namespace

TEST_SUITE("procedural") {

TEST_CASE("same seed, same object") {
  for (auto s : {AppearanceSetting::single_color, AppearanceSetting::default_parts, AppearanceSetting::textured})
    CHECK(generate_object(77, s) == generate_object(77, s));
  CHECK_FALSE(generate_object(77, AppearanceSetting::textured) == generate_object(78, AppearanceSetting::textured));
}

TEST_CASE("objects are one connected piece resting on the base") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const VoxelGrid g = generate_object(seed, AppearanceSetting::default_parts);
    REQUIRE(g.occupied_count() > 0);
    CHECK(connected_components(g) == 1);
    bool on_base = false;
    for (const Cell& c : g.occupied_cells()) on_base |= c[1] == 0;
    CHECK(on_base);
  }
}

TEST_CASE("occupancy is mirror symmetric across x and within the radius") {
  const ObjectOptions opt;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const VoxelGrid g = generate_object(seed, AppearanceSetting::single_color);
    const int n = g.dims()[0];
    for (const Cell& c : g.occupied_cells()) {
      CHECK(g.occupied(Cell{n - 1 - c[0], c[1], c[2]}));
      const double dx = c[0] + 0.5 - 0.5 * n, dz = c[2] + 0.5 - 0.5 * n;
      CHECK(dx * dx + dz * dz <= opt.max_radius * opt.max_radius + 1e-9);
    }
  }
}

TEST_CASE("color settings") {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    CHECK(palette(generate_object(seed, AppearanceSetting::single_color)).size() == 1);
    CHECK(palette(generate_object(seed, AppearanceSetting::textured)).size() == 2);
  }
  std::size_t multi = 0;
  for (std::uint64_t seed = 200; seed < 210; ++seed)
    multi += palette(generate_object(seed, AppearanceSetting::default_parts)).size() > 1;
  CHECK(multi >= 8);
}

TEST_CASE("texture patterns differ between splits") {
  CHECK_FALSE(generate_object(5, AppearanceSetting::textured, Split::train) ==
              generate_object(5, AppearanceSetting::textured, Split::test));
}

TEST_CASE("connected components counts separate pieces") {
  GridGeometry g;
  g.dims = {4, 4, 4};
  VoxelGrid grid(g);
  grid.set(Cell{0, 0, 0}, Color(1, 1, 1));
  grid.set(Cell{1, 0, 0}, Color(1, 1, 1));
  grid.set(Cell{2, 1, 0}, Color(1, 1, 1));  // diagonal only: separate
  CHECK(connected_components(grid) == 2);
}

TEST_CASE("setting names round trip") {
  for (auto s : {AppearanceSetting::single_color, AppearanceSetting::default_parts, AppearanceSetting::textured})
    CHECK(parse_appearance_setting(to_string(s)) == s);
  CHECK_THROWS(parse_appearance_setting("plaid"));
}

}  // TEST_SUITE
