#include "voxelcast/voxel_grid.hpp"

#include <cmath>

#include "voxelcast/io.hpp"

namespace voxelcast {

Cell GridGeometry::cell_at(std::size_t index) const {
  const int z = static_cast<int>(index % dims[2]);
  index /= dims[2];
  const int y = static_cast<int>(index % dims[1]);
  const int x = static_cast<int>(index / dims[1]);
  return {x, y, z};
}

Cell GridGeometry::cell_of(const Vec3& p) const {
  Cell c;
  for (int a = 0; a < 3; ++a) c[a] = static_cast<int>(std::floor((p[a] - origin[a]) / voxel_size));
  return c;
}

void GridGeometry::validate() const {
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw DomainError("grid dims must all be >= 1");
  if (!(voxel_size > 0.0)) throw DomainError("voxel_size must be > 0");
}

VoxelGrid::VoxelGrid(GridGeometry geometry) : geometry_(std::move(geometry)) {
  geometry_.validate();
  data_.assign(4 * geometry_.voxel_count(), 0.0f);
}

void VoxelGrid::set(std::size_t index, const Color& color) {
  float* v = &data_[4 * index];
  v[0] = color.x();
  v[1] = color.y();
  v[2] = color.z();
  v[3] = 1.0f;
}

void VoxelGrid::clear(const Cell& c) {
  float* v = &data_[4 * geometry_.index(c)];
  v[0] = v[1] = v[2] = v[3] = 0.0f;
}

void VoxelGrid::set_color(std::size_t index, const Color& color) {
  float* v = &data_[4 * index];
  v[0] = color.x();
  v[1] = color.y();
  v[2] = color.z();
}

std::size_t VoxelGrid::occupied_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < voxel_count(); ++i) n += occupied(i) ? 1 : 0;
  return n;
}

std::vector<Cell> VoxelGrid::occupied_cells() const {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < voxel_count(); ++i)
    if (occupied(i)) cells.push_back(geometry_.cell_at(i));
  return cells;
}

void VoxelGrid::validate() const {
  geometry_.validate();
  for (std::size_t i = 0; i < voxel_count(); ++i) {
    const float* v = &data_[4 * i];
    if (v[3] != 0.0f && v[3] != 1.0f) throw DomainError("occupancy must be 0 or 1");
    for (int c = 0; c < 3; ++c) {
      if (!(v[c] >= 0.0f && v[c] <= 1.0f)) throw DomainError("voxel color outside [0,1]");
      if (v[3] == 0.0f && v[c] != 0.0f) throw DomainError("empty voxel with nonzero color");
    }
  }
}

void write_vxg(const std::filesystem::path& path, const GridGeometry& geometry, int channels,
               std::span<const float> data) {
  if (data.size() != geometry.voxel_count() * static_cast<std::size_t>(channels))
    throw DimensionError("VXG1 payload does not match dims x channels");
  io::ByteWriter w;
  w.text("VXG1");
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(geometry.dims[a]));
  w.u32(static_cast<std::uint32_t>(channels));
  w.f32(static_cast<float>(geometry.voxel_size));
  for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(geometry.origin[a]));
  w.f32_array(data);
  io::write_file_atomic(path, w.data());
}

void write_grid(const std::filesystem::path& path, const VoxelGrid& grid) {
  write_vxg(path, grid.geometry(), 4, grid.data());
}

VoxelGrid read_grid(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  if (r.text(4) != "VXG1") throw FormatError("bad VXG1 magic: " + path.string());
  GridGeometry g;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(r.u32());
  const auto channels = r.u32();
  if (channels != 4) throw FormatError("expected an RGBA grid: " + path.string());
  g.voxel_size = r.f32();
  for (int a = 0; a < 3; ++a) g.origin[a] = r.f32();
  VoxelGrid grid(g);
  r.f32_array(grid.data());
  if (r.remaining() != 0) throw FormatError("trailing bytes in VXG1 file: " + path.string());
  grid.validate();
  return grid;
}

VoxelGrid degrade_resolution(const VoxelGrid& grid, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) throw DomainError("degradation factor must be in (0, 1]");
  const auto& dims = grid.dims();
  std::array<int, 3> low;
  for (int a = 0; a < 3; ++a) low[a] = std::max(1, static_cast<int>(std::lround(dims[a] * factor)));
  auto down_index = [&](int a, int i) {  // low-res cell -> sampled high-res cell
    return std::min(dims[a] - 1, static_cast<int>(std::floor((i + 0.5) * dims[a] / low[a])));
  };
  auto up_index = [&](int a, int j) {  // high-res cell -> covering low-res cell
    return std::min(low[a] - 1, static_cast<int>(std::floor((j + 0.5) * low[a] / dims[a])));
  };
  VoxelGrid out(grid.geometry());
  for (int x = 0; x < dims[0]; ++x)
    for (int y = 0; y < dims[1]; ++y)
      for (int z = 0; z < dims[2]; ++z) {
        const Cell src{down_index(0, up_index(0, x)), down_index(1, up_index(1, y)), down_index(2, up_index(2, z))};
        if (grid.occupied(src)) out.set(Cell{x, y, z}, grid.color(src));
      }
  return out;
}

}  // namespace voxelcast
