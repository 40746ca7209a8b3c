#include "voxelcast/appearance.hpp"

#include <cmath>

#include "voxelcast/grid_traversal.hpp"

namespace voxelcast {

std::size_t VisibilityMask::visible_count() const {
  std::size_t n = 0;
  for (auto v : visible) n += v;
  return n;
}

VisibilityMask compute_visibility(const VoxelGrid& grid, const Camera& camera) {
  const GridGeometry& g = grid.geometry();
  VisibilityMask mask(g);
  const Vec3 eye = camera.position();
  parallel_for(g.voxel_count(), [&](std::size_t i) {
    if (!grid.occupied(i)) return;
    bool blocked = false;
    walk_toward_source(g, eye, g.cell_at(i), [&](const Cell& c) {
      blocked = grid.occupied(c);
      return !blocked;
    });
    mask.visible[i] = blocked ? 0 : 1;
  });
  return mask;
}

CaptureResult color_from_image(const VoxelGrid& grid, const AppearanceSource& source) {
  const Camera& cam = source.camera;
  if (source.image.width() != cam.width || source.image.height() != cam.height || source.image.channels() != 3)
    throw DimensionError("appearance image does not match camera image dims");
  const GridGeometry& g = grid.geometry();
  CaptureResult out{VoxelGrid(g), compute_visibility(grid, cam)};
  auto& mask = out.mask;

  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    if (!mask.visible[i]) continue;
    out.grid.set(i, Color::Zero());
    const auto proj = project_point(cam, g.center(g.cell_at(i)));
    if (!proj) continue;
    const int px = static_cast<int>(std::floor(proj->u));
    const int py = static_cast<int>(std::floor(proj->v));
    if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
    out.grid.set(i, source.image.rgb(px, py).cwiseMax(0.0f).cwiseMin(1.0f));
    mask.colored[i] = 1;
  }

  const Vec3 eye = cam.position();
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    if (!grid.occupied(i) || mask.visible[i]) continue;
    out.grid.set(i, Color::Zero());
    // The walk runs target -> camera, so the last hit is the first one seen from the camera.
    std::size_t donor = g.voxel_count();
    walk_toward_source(g, eye, g.cell_at(i), [&](const Cell& c) {
      const std::size_t j = g.index(c);
      if (mask.visible[j] && mask.colored[j]) donor = j;
      return true;
    });
    if (donor != g.voxel_count()) {
      out.grid.set(i, out.grid.color(donor));
      mask.colored[i] = 1;
    }
  }
  return out;
}

VoxelGrid symmetry_complete(const VoxelGrid& grid, const VisibilityMask& mask, MirrorAxis axis) {
  const GridGeometry& g = grid.geometry();
  if (!(mask.geometry == g)) throw DimensionError("mask geometry does not match grid");

  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    if (mask.visible[i] && mask.colored[i]) {
      sum += grid.color(i).cast<double>();
      ++count;
    }
  }
  if (count == 0) throw EmptyCaptureError("no visible colored voxels to complete from");
  const Color mean = (sum / static_cast<double>(count)).cast<float>();

  const int mirror_axis = axis == MirrorAxis::x ? 0 : 2;
  VoxelGrid out = grid;
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    if (!grid.occupied(i)) continue;
    if (mask.visible[i] && mask.colored[i]) continue;
    Cell m = g.cell_at(i);
    m[mirror_axis] = g.dims[mirror_axis] - 1 - m[mirror_axis];
    const std::size_t j = g.index(m);
    if (j != i && grid.occupied(j) && mask.visible[j] && mask.colored[j]) {
      out.set_color(i, grid.color(j));
    } else if (!mask.colored[i]) {
      out.set_color(i, mean);
    }
  }
  return out;
}

CaptureResult capture_object_appearance(const Scene& scene, const AppearanceSource& source, MirrorAxis axis) {
  const AssembledScene world = assemble_scene(scene);
  const CaptureResult captured = color_from_image(world.grid, source);
  const GridGeometry& wg = world.grid.geometry();
  const GridGeometry& og = scene.object.geometry();
  const double ground_h = scene.layout.ground_height(scene.ground.layers);

  CaptureResult obj{VoxelGrid(og), VisibilityMask(og)};
  for (std::size_t i = 0; i < og.voxel_count(); ++i) {
    if (!scene.object.occupied(i)) continue;
    obj.grid.set(i, Color::Zero());
    const Cell w = wg.cell_of(object_to_world(scene.pose, og.center(og.cell_at(i)), ground_h));
    if (!wg.contains(w) || !world.grid.occupied(w)) continue;
    const std::size_t j = wg.index(w);
    obj.mask.visible[i] = captured.mask.visible[j];
    obj.mask.colored[i] = captured.mask.colored[j];
    if (captured.mask.colored[j]) obj.grid.set(i, captured.grid.color(j));
  }
  obj.grid = symmetry_complete(obj.grid, obj.mask, axis);
  return obj;
}

void write_visibility_mask(const std::filesystem::path& path, const VisibilityMask& mask) {
  std::vector<float> data(mask.visible.begin(), mask.visible.end());
  write_vxg(path, mask.geometry, 1, data);
}

}  // namespace voxelcast
