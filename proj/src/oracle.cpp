#include "voxelcast/oracle.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <limits>
#include <numbers>

#include "voxelcast/grid_traversal.hpp"

namespace voxelcast {

namespace {

constexpr double kSurfaceOffset = 1e-5;

/// Largest divisor of n not above sqrt(n); strata are cols x rows.
void strata_shape(int n, int& cols, int& rows) {
  cols = 1;
  for (int c = 1; c * c <= n; ++c)
    if (n % c == 0) cols = c;
  rows = n / cols;
}

Vec3 cosine_sample(const Vec3& n, Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform();
  const double r = std::sqrt(u1);
  const double phi = 2.0 * std::numbers::pi * u2;
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 t = n.cross(helper).normalized();
  const Vec3 b = n.cross(t);
  return (r * std::cos(phi) * t + r * std::sin(phi) * b + std::sqrt(std::max(0.0, 1.0 - u1)) * n).normalized();
}

struct Shader {
  const VoxelGrid& grid;
  const AreaLight& light;
  const RenderSettings& settings;
  const std::vector<Vec3>& normals;

  Vec3 normal_at(const RayHit& hit, const Vec3& dir) const {
    const Vec3& n = normals[grid.geometry().index(hit.cell)];
    return n.isZero() ? Vec3(-dir) : n;
  }

  /// Ambient plus direct light at a hit, times albedo.
  Eigen::Vector3d local(const RayHit& hit, const Vec3& dir, int samples, Rng& rng) const {
    const Vec3 x = hit.point + kSurfaceOffset * hit.face_normal;
    const double e = settings.ambient + direct_light(grid, x, normal_at(hit, dir), light, samples, rng);
    return grid.color(hit.cell).cast<double>() * e;
  }

  bool hits_light(const Vec3& o, const Vec3& d) const {
    if (!(d.y() > 0.0)) return false;
    const double t = (light.center.y() - o.y()) / d.y();
    const Vec3 p = o + t * d;
    return std::abs(p.x() - light.center.x()) <= light.half_x && std::abs(p.z() - light.center.z()) <= light.half_z;
  }

  Eigen::Vector3d pixel(const Vec3& o, const Vec3& d, Rng& rng) const {
    RayHit hit;
    if (!trace_first_hit(grid, o, d, hit)) return settings.background.cast<double>();
    Eigen::Vector3d radiance = local(hit, d, settings.shadow_samples, rng);
    const Vec3 x = hit.point + kSurfaceOffset * hit.face_normal;

    if (hit.cell[1] < settings.ground_layers && settings.floor_specular > 0.0) {
      const Vec3 r = d - 2.0 * d.dot(hit.face_normal) * hit.face_normal;
      RayHit mirror;
      if (trace_first_hit(grid, x, r, mirror)) {
        radiance += settings.floor_specular * local(mirror, r, std::max(1, settings.shadow_samples / 4), rng);
      } else if (hits_light(x, r)) {
        radiance += Eigen::Vector3d::Constant(settings.floor_specular);
      }
    }

    if (settings.indirect_bounce && settings.indirect_samples > 0) {
      const Vec3 n = normal_at(hit, d);
      Eigen::Vector3d gathered = Eigen::Vector3d::Zero();
      for (int k = 0; k < settings.indirect_samples; ++k) {
        const Vec3 w = cosine_sample(n, rng);
        if (w.dot(hit.face_normal) <= 0.0) continue;
        RayHit bounce;
        if (trace_first_hit(grid, x, w, bounce)) gathered += local(bounce, w, 1, rng);
      }
      radiance += grid.color(hit.cell).cast<double>().cwiseProduct(gathered / settings.indirect_samples);
    }
    return radiance;
  }
};

}  // namespace

void AreaLight::validate(double ground_height) const {
  if (!(half_x > 0.0 && half_z > 0.0)) throw DomainError("light half extents must be > 0");
  if (!(center.y() > ground_height)) throw DomainError("light must be above the ground");
}

std::vector<Vec3> voxel_normals(const VoxelGrid& grid, const Camera& camera) {
  const GridGeometry& g = grid.geometry();
  const auto& dims = g.dims;
  auto occ = [&](int x, int y, int z) {
    const Cell c{x, y, z};
    return g.contains(c) && grid.occupied(c) ? 1.0 : 0.0;
  };
  // 3x3x3 box sum, separable.
  std::vector<double> sx(g.voxel_count()), sxy(g.voxel_count()), box(g.voxel_count());
  auto at = [&](std::vector<double>& v, int x, int y, int z) -> double {
    const Cell c{x, y, z};
    return g.contains(c) ? v[g.index(c)] : 0.0;
  };
  for (int x = 0; x < dims[0]; ++x)
    for (int y = 0; y < dims[1]; ++y)
      for (int z = 0; z < dims[2]; ++z)
        sx[g.index({x, y, z})] = occ(x - 1, y, z) + occ(x, y, z) + occ(x + 1, y, z);
  for (int x = 0; x < dims[0]; ++x)
    for (int y = 0; y < dims[1]; ++y)
      for (int z = 0; z < dims[2]; ++z)
        sxy[g.index({x, y, z})] = at(sx, x, y - 1, z) + at(sx, x, y, z) + at(sx, x, y + 1, z);
  for (int x = 0; x < dims[0]; ++x)
    for (int y = 0; y < dims[1]; ++y)
      for (int z = 0; z < dims[2]; ++z)
        box[g.index({x, y, z})] = at(sxy, x, y, z - 1) + at(sxy, x, y, z) + at(sxy, x, y, z + 1);

  std::vector<Vec3> normals(g.voxel_count(), Vec3::Zero());
  const Vec3 eye = camera.position();
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    if (!grid.occupied(i)) continue;
    const Cell c = g.cell_at(i);
    const Vec3 grad(at(box, c[0] + 1, c[1], c[2]) - at(box, c[0] - 1, c[1], c[2]),
                    at(box, c[0], c[1] + 1, c[2]) - at(box, c[0], c[1] - 1, c[2]),
                    at(box, c[0], c[1], c[2] + 1) - at(box, c[0], c[1], c[2] - 1));
    const double len = grad.norm();
    normals[i] = len > 1e-9 ? Vec3(-grad / len) : Vec3((eye - g.center(c)).normalized());
  }
  return normals;
}

bool trace_first_hit(const VoxelGrid& grid, const Vec3& o, const Vec3& d, RayHit& hit) {
  const GridGeometry& g = grid.geometry();
  bool found = false;
  traverse_grid(g, o, d, 0.0, std::numeric_limits<double>::infinity(), [&](const Cell& c, double t_enter, double) {
    if (!grid.occupied(c)) return true;
    found = true;
    hit.cell = c;
    hit.t = t_enter;
    hit.point = o + t_enter * d;
    // Entry face: the axis whose entering plane is crossed last.
    int axis = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (d[a] == 0.0) continue;
      const double t = (g.plane(a, c[a] + (d[a] > 0.0 ? 0 : 1)) - o[a]) / d[a];
      if (t > best) {
        best = t;
        axis = a;
      }
    }
    hit.face_normal = Vec3::Zero();
    hit.face_normal[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
    return false;
  });
  return found;
}

bool segment_occluded(const VoxelGrid& grid, const Vec3& a, const Vec3& b) {
  bool blocked = false;
  traverse_grid(grid.geometry(), a, b - a, 0.0, 1.0, [&](const Cell& c, double, double) {
    blocked = grid.occupied(c);
    return !blocked;
  });
  return blocked;
}

double direct_light(const VoxelGrid& grid, const Vec3& x, const Vec3& n, const AreaLight& light, int samples,
                    Rng& rng, bool occlusion) {
  if (samples < 1) throw DomainError("shadow_samples must be >= 1");
  int cols = 1, rows = 1;
  strata_shape(samples, cols, rows);
  double sum = 0.0;
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < cols; ++i) {
      const double s = (i + rng.uniform()) / cols;
      const double t = (j + rng.uniform()) / rows;
      const Vec3 y = light.center + Vec3((2.0 * s - 1.0) * light.half_x, 0.0, (2.0 * t - 1.0) * light.half_z);
      const Vec3 w = y - x;
      const double r2 = w.squaredNorm();
      const double r = std::sqrt(r2);
      const double cos_x = n.dot(w) / r;
      const double cos_l = (y.y() - x.y()) / r;  // light faces -y
      if (cos_x <= 0.0 || cos_l <= 0.0) continue;
      if (occlusion && segment_occluded(grid, x, y)) continue;
      sum += cos_x * cos_l / r2;
    }
  }
  return light.intensity / std::numbers::pi * light.area() * sum / samples;
}

Image render_target(const VoxelGrid& scene_grid, const AreaLight& light, const Camera& camera,
                    const RenderSettings& settings) {
  camera.validate();
  if (settings.shadow_samples < 1) throw DomainError("shadow_samples must be >= 1");
  const std::vector<Vec3> normals = voxel_normals(scene_grid, camera);
  const Shader shader{scene_grid, light, settings, normals};
  Image image(camera.width, camera.height, 3);
  parallel_for(image.pixel_count(), [&](std::size_t p) {
    const int px = static_cast<int>(p % camera.width);
    const int py = static_cast<int>(p / camera.width);
    Rng rng(derive_seed(settings.rng_seed, p));
    Vec3 o, d;
    pixel_ray(camera, px, py, o, d);
    const Eigen::Vector3d c = shader.pixel(o, d, rng).cwiseMax(0.0).cwiseMin(1.0);
    image.set_rgb(px, py, c.cast<float>());
  });
  return image;
}

}  // namespace voxelcast
