#include "voxelcast/camera.hpp"

#include <cmath>
#include <numbers>

namespace voxelcast {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

void Camera::validate() const {
  if (!(elevation_deg >= 0.0 && elevation_deg < 90.0)) throw DomainError("camera elevation must be in [0, 90)");
  if (!(distance > 0.0)) throw DomainError("camera distance must be > 0");
  if (!(focal_length > 0.0 && sensor_width > 0.0)) throw DomainError("focal length and sensor width must be > 0");
  if (width < 1 || height < 1) throw DomainError("image dims must be >= 1");
}

Vec3 Camera::position() const {
  const double e = radians(elevation_deg);
  return distance * Vec3(0.0, std::sin(e), std::cos(e));
}

Vec3 Camera::forward() const {
  const double e = radians(elevation_deg);
  return {0.0, -std::sin(e), -std::cos(e)};
}

Vec3 Camera::up() const {
  const double e = radians(elevation_deg);
  return {0.0, std::cos(e), -std::sin(e)};
}

Vec3 Camera::to_camera(const Vec3& p) const {
  // Relative to the look-at point; the camera sits at -distance along forward.
  return {right().dot(p), up().dot(p), forward().dot(p) + distance};
}

std::optional<Projection> project_point(const Camera& camera, const Vec3& world_point) {
  const Vec3 q = camera.to_camera(world_point);
  if (!(q.z() > 0.0)) return std::nullopt;
  const double f = camera.focal_pixels();
  return Projection{0.5 * camera.width + f * q.x() / q.z(), 0.5 * camera.height - f * q.y() / q.z(), q.z()};
}

void pixel_ray(const Camera& camera, int px, int py, Vec3& origin, Vec3& direction) {
  const double f = camera.focal_pixels();
  const double x = (px + 0.5 - 0.5 * camera.width) / f;
  const double y = (0.5 * camera.height - (py + 0.5)) / f;
  origin = camera.position();
  direction = (camera.forward() + x * camera.right() + y * camera.up()).normalized();
}

}  // namespace voxelcast
