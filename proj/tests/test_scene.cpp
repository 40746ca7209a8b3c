#include <doctest.h>

#include <algorithm>

#include "support/fixtures.hpp"
#include "voxelcast/io.hpp"

using namespace voxelcast;
using voxelcast::testing::procedural_scene;
using voxelcast::testing::TempDir;

namespace {

// Occupied world cells that belong to the object (above the ground slab).
std::vector<Cell> object_cells(const VoxelGrid& world, int ground_layers) {
  std::vector<Cell> out;
  for (const Cell& c : world.occupied_cells())
    if (c[1] >= ground_layers) out.push_back(c);
  return out;
}

int extent(const std::vector<Cell>& cells, int axis) {
  int lo = 1 << 30, hi = -1;
  for (const Cell& c : cells) {
    lo = std::min(lo, c[axis]);
    hi = std::max(hi, c[axis]);
  }
  return hi - lo + 1;
}

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("object rests on the ground slab") {
  const Scene scene = procedural_scene(11);
  const AssembledScene a = assemble_scene(scene);
  CHECK(a.clipped == 0);
  const auto cells = object_cells(a.grid, scene.ground.layers);
  REQUIRE_FALSE(cells.empty());
  const int lowest = std::min_element(cells.begin(), cells.end(), [](auto& p, auto& q) { return p[1] < q[1]; })->at(1);
  CHECK(lowest == scene.ground.layers);
  for (int x = 0; x < 32; ++x)
    for (int z = 0; z < 32; ++z)
      for (int y = 0; y < scene.ground.layers; ++y) CHECK(a.grid.occupied(Cell{x, y, z}));
}

TEST_CASE("without ground the slab is empty and the object does not move") {
  const Scene scene = procedural_scene(12);
  const VoxelGrid with = assemble_scene(scene).grid;
  const VoxelGrid without = assemble_scene(scene, false).grid;
  CHECK(object_cells(with, scene.ground.layers) == without.occupied_cells());
}

TEST_CASE("whole turns leave the assembly unchanged") {
  Scene scene = procedural_scene(13);
  const VoxelGrid base = assemble_scene(scene).grid;
  scene.pose.rotation_y_deg = 360.0;
  CHECK(assemble_scene(scene).grid == base);
  scene.pose.rotation_y_deg = 90.0;
  CHECK(assemble_scene(scene).grid.occupied_count() == base.occupied_count());
}

TEST_CASE("scaling stretches the object extent") {
  Scene scene = procedural_scene(14);
  const int before = extent(object_cells(assemble_scene(scene).grid, 2), 0);
  scene.pose.sx = 1.5;
  const int after = extent(object_cells(assemble_scene(scene).grid, 2), 0);
  CHECK(std::abs(after - 1.5 * before) <= 1.0);
}

TEST_CASE("translation shifts cells by whole voxels") {
  Scene scene = procedural_scene(15);
  const auto base = object_cells(assemble_scene(scene).grid, 2);
  scene.pose.tx = 2.0 * scene.layout.voxel_size();
  scene.pose.tz = -3.0 * scene.layout.voxel_size();
  auto moved = object_cells(assemble_scene(scene).grid, 2);
  for (Cell& c : moved) {
    c[0] -= 2;
    c[2] += 3;
  }
  std::sort(moved.begin(), moved.end());
  CHECK(moved == base);
}

TEST_CASE("object and world transforms are inverse") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Pose p;
    p.rotation_y_deg = rng.uniform(-180.0, 180.0);
    p.tx = rng.uniform(-0.5, 0.5);
    p.tz = rng.uniform(-0.5, 0.5);
    p.sx = rng.uniform(0.5, 2.0);
    p.sy = rng.uniform(0.5, 2.0);
    p.sz = rng.uniform(0.5, 2.0);
    const Vec3 q(rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(-1, 1));
    CHECK((world_to_object(p, object_to_world(p, q, -0.875), -0.875) - q).norm() < 1e-12);
  }
}

TEST_CASE("invalid scale is rejected") {
  Pose p;
  p.sy = 0.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("scene description round trip") {
  SceneDescription d;
  d.object_path = "objects/a b.vxg";
  d.appearance_path = "targets/x.png";
  d.pose.rotation_y_deg = 33.25;
  d.pose.tx = 0.1;
  d.pose.sz = 1.25;
  d.light = Vec3(0.3, 2.9, -1.1);
  d.camera.elevation_deg = 41.0;
  d.ground.layers = 3;
  const SceneDescription r = parse_scene_description(serialize_scene_description(d));
  CHECK(r.object_path == d.object_path);
  CHECK(r.appearance_path == d.appearance_path);
  CHECK(r.pose == d.pose);
  CHECK(r.light == d.light);
  CHECK(r.camera.elevation_deg == d.camera.elevation_deg);
  CHECK(r.ground.layers == 3);
}

TEST_CASE("grid files round trip exactly") {
  TempDir dir("scene");
  const VoxelGrid g = generate_object(21, AppearanceSetting::textured);
  write_grid(dir / "g.vxg", g);
  CHECK(read_grid(dir / "g.vxg") == g);
}

TEST_CASE("truncated grid file is a format error") {
  TempDir dir("scene");
  write_grid(dir / "g.vxg", generate_object(22, AppearanceSetting::single_color));
  auto bytes = io::read_file(dir / "g.vxg");
  bytes.resize(bytes.size() / 2);
  io::write_file_atomic(dir / "t.vxg", bytes);
  CHECK_THROWS_AS(read_grid(dir / "t.vxg"), FormatError);
}

TEST_CASE("load_scene resolves paths relative to the scene file") {
  TempDir dir("scene");
  std::filesystem::create_directories(dir / "objects");
  const VoxelGrid g = generate_object(23, AppearanceSetting::default_parts);
  write_grid(dir / "objects/o.vxg", g);
  SceneDescription d;
  d.object_path = "objects/o.vxg";
  save_scene_description(dir / "s.scene", d);
  CHECK(load_scene(dir / "s.scene").object == g);
}

TEST_CASE("degrading by 1 is the identity, by 1/2 keeps the geometry") {
  const VoxelGrid g = generate_object(24, AppearanceSetting::textured);
  CHECK(degrade_resolution(g, 1.0) == g);
  const VoxelGrid half = degrade_resolution(g, 0.5);
  CHECK(half.geometry() == g.geometry());
  CHECK(half.occupied_count() > 0);
}

TEST_CASE("camera frame resampling at the canonical pose keeps the occupancy count") {
  const Scene scene = procedural_scene(25);
  const VoxelGrid world = assemble_scene(scene, false).grid;
  Camera cam;
  cam.elevation_deg = 0.0;
  const VoxelGrid cf = world_to_camera(world, cam);
  CHECK(cf.geometry().dims == world.geometry().dims);
  CHECK(cf.occupied_count() == world.occupied_count());
}

}  // TEST_SUITE
