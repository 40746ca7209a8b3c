#pragma once

#include <filesystem>
#include <string>

#include "voxelcast/camera.hpp"
#include "voxelcast/voxel_grid.hpp"

namespace voxelcast {

/// Object placement edits, applied as scale, then rotation about +y, then
/// translation on the ground plane.
struct Pose {
  double rotation_y_deg = 0.0;
  double tx = 0.0;
  double tz = 0.0;
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  void validate() const;
  bool operator==(const Pose&) const = default;
};

struct Ground {
  int layers = 2;
  Color color{0.6f, 0.6f, 0.6f};
  double specular = 0.3;
};

/// The world-frame scene grid: a cube [-half_extent, half_extent]^3 split into
/// resolution^3 voxels.
struct SceneLayout {
  int resolution = 32;
  double half_extent = 1.0;

  GridGeometry geometry() const;
  double voxel_size() const { return 2.0 * half_extent / resolution; }
  /// Height of the top of a ground slab `layers` voxels thick.
  double ground_height(int layers) const { return -half_extent + layers * voxel_size(); }
};

/// Object frame convention: x and z centered on the object grid, y = 0 at the
/// object's base. The object's base is placed on the ground plane.
struct Scene {
  VoxelGrid object;
  Pose pose;
  Ground ground;
  Vec3 light{0.0, 2.75, 0.0};
  Camera camera;
  SceneLayout layout;

  /// Light and translation inside the sampling envelope used for training.
  bool within_training_envelope() const;
};

/// Object grid geometry for an n^3 object using the scene voxel size, placed
/// per the object frame convention.
GridGeometry object_geometry(int n, const SceneLayout& layout);

/// Object-frame point to world.
Vec3 object_to_world(const Pose& pose, const Vec3& p, double ground_height);
Vec3 world_to_object(const Pose& pose, const Vec3& w, double ground_height);

struct AssembledScene {
  VoxelGrid grid;
  /// Occupied object voxels whose transformed center falls outside the grid.
  std::size_t clipped = 0;
};

/// Places the posed object in the world grid (inverse-mapped nearest
/// neighbour) on top of the ground slab. With `with_ground` false the slab
/// is left empty but the object keeps its height.
AssembledScene assemble_scene(const Scene& scene, bool with_ground = true);

/// Resamples a world grid into the camera-aligned frame: same dims and voxel
/// size, centered on the look-at point, axes (right, up, depth).
VoxelGrid world_to_camera(const VoxelGrid& world, const Camera& camera);

/// On-disk scene: references to the object grid and appearance source plus
/// every editable attribute.
struct SceneDescription {
  std::string object_path;
  std::string appearance_path;  ///< optional
  Pose pose;
  Ground ground;
  Vec3 light{0.0, 2.75, 0.0};
  Camera camera;
  SceneLayout layout;
};

SceneDescription parse_scene_description(const std::string& text);
std::string serialize_scene_description(const SceneDescription& desc);
SceneDescription load_scene_description(const std::filesystem::path& path);
void save_scene_description(const std::filesystem::path& path, const SceneDescription& desc);

/// Loads the description and its object grid (paths relative to the file).
Scene load_scene(const std::filesystem::path& path);
Scene make_scene(const SceneDescription& desc, VoxelGrid object);

}  // namespace voxelcast
