#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "voxelcast/dataset.hpp"
#include "voxelcast/procedural.hpp"
#include "voxelcast/scene.hpp"
#include "voxelcast/trainer.hpp"

namespace voxelcast::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("voxelcast_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Grid with the given cells set to one color.
inline VoxelGrid grid_with(const GridGeometry& g, std::initializer_list<Cell> cells, Color color = Color(1, 0, 0)) {
  VoxelGrid grid(g);
  for (const Cell& c : cells) grid.set(c, color);
  return grid;
}

inline GridGeometry cube_geometry(int n, double half_extent = 1.0) {
  GridGeometry g;
  g.dims = {n, n, n};
  g.voxel_size = 2.0 * half_extent / n;
  g.origin = Vec3::Constant(-half_extent);
  return g;
}

/// Procedural object in a default scene.
inline Scene procedural_scene(std::uint64_t seed, AppearanceSetting setting = AppearanceSetting::default_parts) {
  Scene scene;
  scene.object = generate_object(seed, setting);
  return scene;
}

/// Network sample from a procedural scene with a cheap target render.
inline TrainingSample quick_sample(std::uint64_t seed, const Vec3& light = Vec3(0.0, 2.75, 0.0)) {
  Scene scene = procedural_scene(seed);
  scene.light = light;
  RenderSettings rs;
  rs.shadow_samples = 2;
  rs.indirect_bounce = false;
  rs.rng_seed = seed;
  return TrainingSample::from_scene(scene, splat_scene(scene).color, render_scene(scene, rs));
}

}  // namespace voxelcast::testing
