#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "voxelcast/camera.hpp"
#include "voxelcast/image.hpp"
#include "voxelcast/voxel_grid.hpp"

namespace voxelcast {

/// Splat image S. depth is +inf and color black wherever coverage is 0.
struct SplatCanvas {
  Image color;
  std::vector<double> depth;
  std::vector<std::uint8_t> coverage;
  /// Linear index of the winning voxel, -1 where uncovered.
  std::vector<std::int64_t> source;

  std::size_t covered_count() const;
};

struct SplatOptions {
  /// Multiplies the footprint radius before rounding up.
  double radius_scale = 1.0;
  /// When > 0, every splat uses this radius instead.
  int fixed_radius = 0;
};

/// Disc radius in pixels for a voxel of `voxel_size` seen at `depth`:
/// ceil(0.5 * scale * projected voxel size), at least 1.
int splat_radius(const Camera& camera, double voxel_size, double depth, const SplatOptions& options = {});

/// True when pixel (px, py)'s center lies within `radius` of (u, v).
inline bool disc_covers(double u, double v, int radius, int px, int py) {
  const double dx = px + 0.5 - u;
  const double dy = py + 0.5 - v;
  return dx * dx + dy * dy <= static_cast<double>(radius) * radius;
}

/// Projects each occupied voxel center and rasterises a hard disc. Per pixel
/// the smallest depth wins; equal depths go to the smaller voxel index, so
/// the result does not depend on iteration order.
SplatCanvas splat(const VoxelGrid& grid, const Camera& camera, const SplatOptions& options = {});

/// Same z-buffer rule over an explicit visiting order. splat() uses the
/// natural index order; this exists to check order independence.
SplatCanvas splat_in_order(const VoxelGrid& grid, const Camera& camera, const std::vector<std::size_t>& order,
                           const SplatOptions& options = {});

/// PNG color plus a float32 depth sidecar (IMF1, one channel, +inf where empty).
void write_splat(const std::filesystem::path& color_path, const std::filesystem::path& depth_path,
                 const SplatCanvas& canvas);

}  // namespace voxelcast
