#pragma once

#include <optional>

#include "voxelcast/core.hpp"

namespace voxelcast {

/// Pinhole camera on a sphere around the world origin, looking at the origin.
/// Azimuth is fixed: the camera sits in the y-z half-plane with z > 0.
/// Right-handed, y up.
struct Camera {
  double elevation_deg = 30.0;
  double distance = 3.0;
  double focal_length = 40.0;
  /// Same unit as focal_length; 32 gives a horizontal FOV of 2*atan(16/40).
  double sensor_width = 32.0;
  int width = 64;
  int height = 64;

  void validate() const;

  Vec3 position() const;
  Vec3 forward() const;
  Vec3 right() const { return Vec3::UnitX(); }
  Vec3 up() const;
  /// Focal length in pixels (square pixels).
  double focal_pixels() const { return focal_length / sensor_width * width; }

  /// Camera-frame coordinates (right, up, depth) of a world point.
  Vec3 to_camera(const Vec3& world) const;
};

struct Projection {
  double u = 0.0;  ///< pixel column, continuous; pixel i covers [i, i+1)
  double v = 0.0;  ///< pixel row, continuous, growing downward
  double depth = 0.0;
};

/// Pinhole projection. nullopt when the point is on or behind the camera plane.
std::optional<Projection> project_point(const Camera& camera, const Vec3& world_point);

/// Ray through the center of pixel (px, py). Direction is unit length.
void pixel_ray(const Camera& camera, int px, int py, Vec3& origin, Vec3& direction);

}  // namespace voxelcast
