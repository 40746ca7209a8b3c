#include <doctest.h>

#include "support/fixtures.hpp"
#include "voxelcast/appearance.hpp"
#include "voxelcast/dataset.hpp"
#include "voxelcast/splatter.hpp"

using namespace voxelcast;
using voxelcast::testing::cube_geometry;
using voxelcast::testing::grid_with;

TEST_SUITE("appearance") {

TEST_CASE("a lone voxel is visible") {
  const VoxelGrid g = grid_with(cube_geometry(8), {Cell{3, 4, 5}});
  const VisibilityMask m = compute_visibility(g, Camera{});
  CHECK(m.visible_count() == 1);
  CHECK(m.visible[g.geometry().index({3, 4, 5})] == 1);
}

TEST_CASE("the core of a solid block is hidden") {
  VoxelGrid g(cube_geometry(8));
  for (int x = 2; x < 5; ++x)
    for (int y = 2; y < 5; ++y)
      for (int z = 2; z < 5; ++z) g.set(Cell{x, y, z}, Color(1, 1, 1));
  const VisibilityMask m = compute_visibility(g, Camera{});
  CHECK(m.visible[g.geometry().index({3, 3, 3})] == 0);
  CHECK(m.visible[g.geometry().index({3, 4, 4})] == 1);  // top face, front row
  CHECK(m.visible[g.geometry().index({3, 3, 2})] == 0);  // back face
}

TEST_CASE("visible implies occupied") {
  const VoxelGrid g = generate_object(5, AppearanceSetting::single_color);
  const VisibilityMask m = compute_visibility(g, Camera{});
  for (std::size_t i = 0; i < g.voxel_count(); ++i)
    if (m.visible[i]) CHECK(g.occupied(i));
}

TEST_CASE("a uniform image colors every visible voxel") {
  const VoxelGrid g = generate_object(6, AppearanceSetting::default_parts);
  AppearanceSource src{Image(64, 64, 3, 0.25f), Camera{}};
  const CaptureResult cap = color_from_image(g, src);
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    if (cap.mask.visible[i]) {
      REQUIRE(cap.mask.colored[i] == 1);
      CHECK(cap.grid.color(i) == Color(0.25f, 0.25f, 0.25f));
    }
    CHECK(cap.grid.occupied(i) == g.occupied(i));
  }
}

TEST_CASE("capturing a splat of the object recovers its visible colors") {
  Scene scene = voxelcast::testing::procedural_scene(7);
  const SplatCanvas canvas = splat_scene(scene);
  const CaptureResult cap = capture_object_appearance(scene, {canvas.color, scene.camera});
  std::size_t visible = 0, exact = 0;
  for (std::size_t i = 0; i < scene.object.voxel_count(); ++i) {
    if (!cap.mask.visible[i]) continue;
    ++visible;
    if ((cap.grid.color(i) - scene.object.color(i)).cwiseAbs().maxCoeff() < 1e-6f) ++exact;
  }
  REQUIRE(visible > 50);
  CHECK(static_cast<double>(exact) / visible > 0.8);
}

TEST_CASE("symmetry completion copies the visible mirror") {
  GridGeometry g = cube_geometry(4);
  VoxelGrid grid = grid_with(g, {Cell{0, 1, 1}, Cell{3, 1, 1}}, Color(0, 0, 0));
  VisibilityMask mask(g);
  const std::size_t seen = g.index({0, 1, 1}), hidden = g.index({3, 1, 1});
  grid.set_color(seen, Color(0.2f, 0.4f, 0.6f));
  mask.visible[seen] = mask.colored[seen] = 1;
  const VoxelGrid done = symmetry_complete(grid, mask);
  CHECK(done.color(hidden) == Color(0.2f, 0.4f, 0.6f));
  CHECK(done.color(seen) == Color(0.2f, 0.4f, 0.6f));
}

TEST_CASE("voxels without a mirror take the mean visible color") {
  GridGeometry g = cube_geometry(4);
  VoxelGrid grid = grid_with(g, {Cell{0, 0, 0}, Cell{1, 0, 0}, Cell{1, 3, 3}}, Color(0, 0, 0));
  VisibilityMask mask(g);
  grid.set_color(g.index({0, 0, 0}), Color(1, 0, 0));
  grid.set_color(g.index({1, 0, 0}), Color(0, 0, 1));
  for (const Cell& c : {Cell{0, 0, 0}, Cell{1, 0, 0}}) mask.visible[g.index(c)] = mask.colored[g.index(c)] = 1;
  const VoxelGrid done = symmetry_complete(grid, mask);
  CHECK(done.color(g.index({1, 3, 3})) == Color(0.5f, 0.0f, 0.5f));
}

TEST_CASE("nothing visible is an error") {
  const VoxelGrid g = grid_with(cube_geometry(4), {Cell{1, 1, 1}});
  CHECK_THROWS_AS(symmetry_complete(g, VisibilityMask(g.geometry())), EmptyCaptureError);
}

}  // TEST_SUITE
