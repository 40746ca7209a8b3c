#include "voxelcast/splatter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxelcast {

std::size_t SplatCanvas::covered_count() const {
  return static_cast<std::size_t>(std::count(coverage.begin(), coverage.end(), std::uint8_t{1}));
}

int splat_radius(const Camera& camera, double voxel_size, double depth, const SplatOptions& options) {
  if (options.fixed_radius > 0) return options.fixed_radius;
  const double pixels = voxel_size * camera.focal_pixels() / depth;
  return std::max(1, static_cast<int>(std::ceil(0.5 * options.radius_scale * pixels)));
}

SplatCanvas splat_in_order(const VoxelGrid& grid, const Camera& camera, const std::vector<std::size_t>& order,
                           const SplatOptions& options) {
  camera.validate();
  const int w = camera.width, h = camera.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  SplatCanvas canvas{Image(w, h, 3), std::vector<double>(n, std::numeric_limits<double>::infinity()),
                     std::vector<std::uint8_t>(n, 0), std::vector<std::int64_t>(n, -1)};
  const GridGeometry& g = grid.geometry();

  for (const std::size_t i : order) {
    if (!grid.occupied(i)) continue;
    const auto proj = project_point(camera, g.center(g.cell_at(i)));
    if (!proj) continue;
    const int r = splat_radius(camera, g.voxel_size, proj->depth, options);
    const int x0 = std::max(0, static_cast<int>(std::floor(proj->u - r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(proj->u + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(proj->v - r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(proj->v + r)));
    const Color c = grid.color(i);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!disc_covers(proj->u, proj->v, r, x, y)) continue;
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const bool wins = proj->depth < canvas.depth[p] ||
                          (proj->depth == canvas.depth[p] && static_cast<std::int64_t>(i) < canvas.source[p]);
        if (!wins) continue;
        canvas.depth[p] = proj->depth;
        canvas.source[p] = static_cast<std::int64_t>(i);
        canvas.coverage[p] = 1;
        canvas.color.set_rgb(x, y, c);
      }
    }
  }
  return canvas;
}

SplatCanvas splat(const VoxelGrid& grid, const Camera& camera, const SplatOptions& options) {
  std::vector<std::size_t> order(grid.voxel_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return splat_in_order(grid, camera, order, options);
}

void write_splat(const std::filesystem::path& color_path, const std::filesystem::path& depth_path,
                 const SplatCanvas& canvas) {
  write_png(color_path, canvas.color);
  Image depth(canvas.color.width(), canvas.color.height(), 1);
  for (std::size_t p = 0; p < canvas.depth.size(); ++p) depth.data()[p] = static_cast<float>(canvas.depth[p]);
  write_raw_image(depth_path, depth);
}

}  // namespace voxelcast
