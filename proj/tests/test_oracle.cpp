#include <doctest.h>

#include <cmath>

#include "support/fixtures.hpp"
#include "voxelcast/oracle.hpp"

using namespace voxelcast;
using voxelcast::testing::cube_geometry;
using voxelcast::testing::grid_with;

TEST_SUITE("oracle") {

TEST_CASE("axis ray hits the near face of a voxel") {
  const GridGeometry g = cube_geometry(8);  // voxel size 0.25
  const VoxelGrid grid = grid_with(g, {Cell{4, 4, 6}});
  RayHit hit;
  REQUIRE(trace_first_hit(grid, Vec3(0.1, 0.1, 3.0), Vec3(0, 0, -1), hit));
  CHECK(hit.cell == Cell{4, 4, 6});
  CHECK(hit.t == doctest::Approx(3.0 - 0.75).epsilon(1e-12));
  CHECK(hit.face_normal == Vec3(0, 0, 1));
  CHECK_FALSE(trace_first_hit(grid, Vec3(0.1, 0.1, 3.0), Vec3(0, 0, 1), hit));
}

TEST_CASE("segment occlusion") {
  const VoxelGrid grid = grid_with(cube_geometry(8), {Cell{4, 4, 4}});
  CHECK(segment_occluded(grid, Vec3(0.1, 0.1, -0.9), Vec3(0.1, 0.1, 0.9)));
  CHECK_FALSE(segment_occluded(grid, Vec3(0.6, 0.1, -0.9), Vec3(0.6, 0.1, 0.9)));
  CHECK_FALSE(segment_occluded(grid, Vec3(0.1, 0.1, 0.6), Vec3(0.1, 0.1, 0.9)));
}

TEST_CASE("direct light vanishes for surfaces facing away or above the light") {
  const VoxelGrid grid(cube_geometry(8));
  AreaLight light;
  Rng rng(1);
  CHECK(direct_light(grid, Vec3(0, -0.5, 0), Vec3(0, -1, 0), light, 16, rng) == 0.0);
  CHECK(direct_light(grid, Vec3(0, 3.5, 0), Vec3(0, 1, 0), light, 16, rng) == 0.0);
  CHECK(direct_light(grid, Vec3(0, -0.5, 0), Vec3(0, 1, 0), light, 16, rng) > 0.0);
}

TEST_CASE("direct light falls off with distance") {
  const VoxelGrid grid(cube_geometry(8));
  AreaLight light;
  Rng a(2), b(2);
  const double near = direct_light(grid, Vec3(0, 0.5, 0), Vec3(0, 1, 0), light, 64, a);
  const double far = direct_light(grid, Vec3(0, -0.9, 0), Vec3(0, 1, 0), light, 64, b);
  CHECK(near > far);
}

TEST_CASE("a blocker between point and light casts a full shadow") {
  VoxelGrid grid(cube_geometry(8));
  for (int x = 0; x < 8; ++x)
    for (int z = 0; z < 8; ++z) grid.set(Cell{x, 6, z}, Color(1, 1, 1));
  Rng rng(3);
  CHECK(direct_light(grid, Vec3(0, -0.5, 0), Vec3(0, 1, 0), AreaLight{}, 32, rng) == 0.0);
}

TEST_CASE("top face of a slab has an upward normal") {
  VoxelGrid grid(cube_geometry(8));
  for (int x = 0; x < 8; ++x)
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 3; ++y) grid.set(Cell{x, y, z}, Color(1, 1, 1));
  const auto n = voxel_normals(grid, Camera{});
  const Vec3 top = n[grid.geometry().index({4, 2, 4})];
  CHECK(top.y() == doctest::Approx(1.0));
  CHECK(n[grid.geometry().index({4, 5, 4})] == Vec3::Zero());
}

TEST_CASE("renders are deterministic, bounded and black where rays escape") {
  const Scene scene = voxelcast::testing::procedural_scene(4);
  const VoxelGrid world = assemble_scene(scene).grid;
  RenderSettings s;
  s.shadow_samples = 4;
  s.rng_seed = 9;
  const Image a = render_target(world, AreaLight{}, scene.camera, s);
  const Image b = render_target(world, AreaLight{}, scene.camera, s);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  for (float v : a.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  const Image empty = render_target(VoxelGrid(world.geometry()), AreaLight{}, scene.camera, s);
  for (float v : empty.data()) CHECK(v == 0.0f);
}

TEST_CASE("moving the light changes the render") {
  const Scene scene = voxelcast::testing::procedural_scene(5);
  const VoxelGrid world = assemble_scene(scene).grid;
  RenderSettings s;
  s.shadow_samples = 4;
  AreaLight left, right;
  left.center.x() = -1.2;
  right.center.x() = 1.2;
  const Image a = render_target(world, left, scene.camera, s);
  const Image b = render_target(world, right, scene.camera, s);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) diff += std::abs(a.data()[i] - b.data()[i]);
  CHECK(diff / a.data().size() > 0.01);
}

TEST_CASE("light below the ground is rejected") {
  AreaLight l;
  l.center.y() = -0.9;
  CHECK_THROWS_AS(l.validate(-0.875), DomainError);
}

}  // TEST_SUITE
