#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "voxelcast/core.hpp"

namespace voxelcast {

using Cell = std::array<int, 3>;

/// Placement of a dense grid in world space. Voxel (0,0,0) has its minimum
/// corner at `origin`; storage is row-major with z fastest.
struct GridGeometry {
  std::array<int, 3> dims{1, 1, 1};
  double voxel_size = 1.0;
  Vec3 origin = Vec3::Zero();

  std::size_t voxel_count() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  bool contains(const Cell& c) const {
    return c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < dims[0] && c[1] < dims[1] && c[2] < dims[2];
  }
  std::size_t index(const Cell& c) const {
    return (static_cast<std::size_t>(c[0]) * dims[1] + c[1]) * dims[2] + c[2];
  }
  Cell cell_at(std::size_t index) const;
  Vec3 center(const Cell& c) const {
    return origin + voxel_size * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
  }
  /// Lower boundary plane of cell index `i` along `axis`. Every traversal and
  /// intersection routine computes planes through this one expression.
  double plane(int axis, int i) const { return origin[axis] + i * voxel_size; }
  /// Cell containing p (floor of the continuous index). May be out of range.
  Cell cell_of(const Vec3& p) const;
  Vec3 max_corner() const { return origin + voxel_size * Vec3(dims[0], dims[1], dims[2]); }
  void validate() const;
  bool operator==(const GridGeometry& o) const {
    return dims == o.dims && voxel_size == o.voxel_size && origin == o.origin;
  }
};

/// Dense RGBA voxel grid. Channel 3 holds occupancy in {0, 1}; empty voxels
/// carry black.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(GridGeometry geometry);

  const GridGeometry& geometry() const { return geometry_; }
  const std::array<int, 3>& dims() const { return geometry_.dims; }
  double voxel_size() const { return geometry_.voxel_size; }
  const Vec3& origin() const { return geometry_.origin; }
  std::size_t voxel_count() const { return geometry_.voxel_count(); }

  bool occupied(const Cell& c) const { return data_[4 * geometry_.index(c) + 3] > 0.5f; }
  bool occupied(std::size_t index) const { return data_[4 * index + 3] > 0.5f; }
  Color color(const Cell& c) const { return color(geometry_.index(c)); }
  Color color(std::size_t index) const {
    return {data_[4 * index], data_[4 * index + 1], data_[4 * index + 2]};
  }
  /// Marks the voxel occupied with the given color.
  void set(const Cell& c, const Color& color) { set(geometry_.index(c), color); }
  void set(std::size_t index, const Color& color);
  void clear(const Cell& c);
  /// Recolors an occupied voxel without touching occupancy.
  void set_color(std::size_t index, const Color& color);

  std::size_t occupied_count() const;
  std::vector<Cell> occupied_cells() const;

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  /// Throws DomainError when an invariant is violated.
  void validate() const;

  bool operator==(const VoxelGrid& o) const { return geometry_ == o.geometry_ && data_ == o.data_; }

 private:
  GridGeometry geometry_;
  std::vector<float> data_;
};

/// VXG1 file: "VXG1", nx, ny, nz, channels (u32), voxel_size (f32),
/// origin xyz (f32), then row-major float32 channel data. All little-endian.
void write_vxg(const std::filesystem::path& path, const GridGeometry& geometry, int channels,
               std::span<const float> data);
void write_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_grid(const std::filesystem::path& path);

/// Nearest-neighbour downsample of every axis to `factor` of its size and back.
/// Used for voxel-resolution degradation studies.
VoxelGrid degrade_resolution(const VoxelGrid& grid, double factor);

}  // namespace voxelcast
