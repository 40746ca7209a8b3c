#pragma once

#include <cstdint>
#include <vector>

#include "voxelcast/camera.hpp"
#include "voxelcast/image.hpp"
#include "voxelcast/voxel_grid.hpp"

namespace voxelcast {

/// White rectangular emitter parallel to the ground, facing down.
/// `intensity` is its emitted radiance.
struct AreaLight {
  Vec3 center{0.0, 2.75, 0.0};
  double half_x = 0.5;
  double half_z = 0.5;
  double intensity = 36.0;

  double area() const { return 4.0 * half_x * half_z; }
  void validate(double ground_height) const;
};

struct RenderSettings {
  int shadow_samples = 16;
  bool indirect_bounce = true;
  int indirect_samples = 4;
  double ambient = 0.1;
  double floor_specular = 0.3;
  std::uint64_t rng_seed = 0;
  /// Voxels with y index below this are floor and get the specular term.
  int ground_layers = 2;
  Color background = Color::Zero();
};

/// Unit normals from central differences of the 3x3x3 box-averaged
/// occupancy. Where that gradient vanishes the normal faces the camera.
/// Empty voxels get a zero vector.
std::vector<Vec3> voxel_normals(const VoxelGrid& grid, const Camera& camera);

/// First occupied voxel along o + t*d, t >= 0.
struct RayHit {
  Cell cell{};
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 face_normal = Vec3::Zero();
};
bool trace_first_hit(const VoxelGrid& grid, const Vec3& o, const Vec3& d, RayHit& hit);

/// True when any occupied voxel lies on the open segment from a to b.
bool segment_occluded(const VoxelGrid& grid, const Vec3& a, const Vec3& b);

/// Lambertian direct-light factor at x with normal n: intensity / pi times the
/// stratified estimate of the integral of cos(x) cos(light) / r^2 over the
/// light, with binary visibility. Multiply by albedo for outgoing radiance.
double direct_light(const VoxelGrid& grid, const Vec3& x, const Vec3& n, const AreaLight& light, int samples,
                    Rng& rng, bool occlusion = true);

/// Target image: primary ray to the nearest voxel, ambient plus stratified
/// soft-shadowed direct light, a mirror reflection term on the floor, and an
/// optional one-bounce indirect term. Clamped to [0, 1]. Each pixel draws from
/// its own stream derived from (rng_seed, pixel index).
Image render_target(const VoxelGrid& scene_grid, const AreaLight& light, const Camera& camera,
                    const RenderSettings& settings);

}  // namespace voxelcast
