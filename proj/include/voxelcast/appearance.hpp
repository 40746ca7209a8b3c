#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "voxelcast/image.hpp"
#include "voxelcast/scene.hpp"

namespace voxelcast {

/// Per-voxel capture state paired with a grid of the same geometry.
/// `visible[i] = 1` implies the voxel is occupied. `colored[i] = 1` marks
/// voxels that received a color during capture; occupied voxels with
/// `colored[i] = 0` are the ones left for symmetry completion.
struct VisibilityMask {
  GridGeometry geometry;
  std::vector<std::uint8_t> visible;
  std::vector<std::uint8_t> colored;

  explicit VisibilityMask(GridGeometry g = {})
      : geometry(g), visible(g.voxel_count(), 0), colored(g.voxel_count(), 0) {}
  std::size_t visible_count() const;
};

/// An image aligned with the grid's world frame through `camera`.
struct AppearanceSource {
  Image image;
  Camera camera;
};

class EmptyCaptureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A voxel is visible when the segment from the camera center to its center
/// crosses no other occupied voxel before entering it. Grazing a face, edge or
/// corner is not a crossing.
VisibilityMask compute_visibility(const VoxelGrid& grid, const Camera& camera);

struct CaptureResult {
  VoxelGrid grid;
  VisibilityMask mask;
};

/// Un-projects pixel colors onto visible voxels (nearest pixel). Hidden
/// voxels copy the first visible, colored voxel along their own camera ray.
/// Voxels projecting outside the image, and hidden voxels with no such voxel
/// on their ray, stay uncolored (black, colored = 0).
CaptureResult color_from_image(const VoxelGrid& grid, const AppearanceSource& source);

/// Plane the symmetry pass mirrors across, in object grid index space.
enum class MirrorAxis { x, z };

/// Hidden or uncolored voxels copy their mirror's color when the mirror is
/// visible and colored. Whatever is still uncolored takes the mean color of
/// the visible colored voxels. Throws EmptyCaptureError when nothing visible
/// was colored.
VoxelGrid symmetry_complete(const VoxelGrid& grid, const VisibilityMask& mask, MirrorAxis axis = MirrorAxis::x);

/// Full capture for an object posed in a scene: capture in the world frame
/// at the source camera, pull colors and visibility back onto the object
/// grid, then run symmetry completion in the object frame.
CaptureResult capture_object_appearance(const Scene& scene, const AppearanceSource& source,
                                        MirrorAxis axis = MirrorAxis::x);

/// Single-channel VXG1 export of the visibility flags.
void write_visibility_mask(const std::filesystem::path& path, const VisibilityMask& mask);

}  // namespace voxelcast
