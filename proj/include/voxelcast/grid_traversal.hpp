#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxelcast/voxel_grid.hpp"

namespace voxelcast {

/// Clips the ray o + t*d, t in [t_min, t_max], against the grid box.
/// Returns false when the clipped interval is empty.
inline bool clip_to_grid(const GridGeometry& g, const Vec3& o, const Vec3& d, double& t_min, double& t_max) {
  for (int a = 0; a < 3; ++a) {
    const double lo = g.plane(a, 0);
    const double hi = g.plane(a, g.dims[a]);
    if (d[a] == 0.0) {
      if (o[a] < lo || o[a] > hi) return false;
      continue;
    }
    double t0 = (lo - o[a]) / d[a];
    double t1 = (hi - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_min = std::max(t_min, t0);
    t_max = std::min(t_max, t1);
  }
  return t_min <= t_max;
}

/// Amanatides-Woo traversal of the cells crossed by o + t*d for t in
/// [t_min, t_max]. visit(cell, t_enter, t_exit) returns false to stop.
/// Boundary crossings are recomputed from integer indices on every step, so
/// there is no accumulated drift.
template <class Visitor>
void traverse_grid(const GridGeometry& g, const Vec3& o, const Vec3& d, double t_min, double t_max,
                   Visitor&& visit) {
  if (!clip_to_grid(g, o, d, t_min, t_max)) return;
  const Vec3 start = o + d * (0.5 * (t_min + std::min(t_max, t_min + 1e-9)));
  Cell cell = g.cell_of(start);
  int step[3];
  double next[3];
  for (int a = 0; a < 3; ++a) {
    cell[a] = std::clamp(cell[a], 0, g.dims[a] - 1);
    step[a] = d[a] > 0.0 ? 1 : (d[a] < 0.0 ? -1 : 0);
    next[a] = step[a] == 0 ? std::numeric_limits<double>::infinity()
                           : (g.plane(a, cell[a] + (step[a] > 0 ? 1 : 0)) - o[a]) / d[a];
  }
  double t = t_min;
  while (true) {
    const double t_exit = std::min({next[0], next[1], next[2], t_max});
    if (!visit(static_cast<const Cell&>(cell), t, t_exit)) return;
    if (t_exit >= t_max) return;
    for (int a = 0; a < 3; ++a) {
      if (next[a] == t_exit) {
        cell[a] += step[a];
        if (cell[a] < 0 || cell[a] >= g.dims[a]) return;
        next[a] = (g.plane(a, cell[a] + (step[a] > 0 ? 1 : 0)) - o[a]) / d[a];
      }
    }
    t = t_exit;
  }
}

/// Walks the segment from `source` to the center of `target` backwards,
/// starting at the target, and visits every cell the segment crosses with
/// positive length before it enters the target, nearest-to-target first.
/// The segment is parametrised forward (t = 0 at source, t = 1 at the
/// center) and crossing times use GridGeometry::plane, so they are bit-equal
/// to a slab test on the same cells. Rays crossing an edge or corner step all
/// tied axes together and never visit the grazed cells.
/// visit(cell) returns false to stop.
template <class Visitor>
void walk_toward_source(const GridGeometry& g, const Vec3& source, const Cell& target, Visitor&& visit) {
  const Vec3 d = g.center(target) - source;
  Cell cell = target;
  while (true) {
    double t_star = -std::numeric_limits<double>::infinity();
    double t_axis[3];
    for (int a = 0; a < 3; ++a) {
      if (d[a] > 0.0) {
        t_axis[a] = (g.plane(a, cell[a]) - source[a]) / d[a];
      } else if (d[a] < 0.0) {
        t_axis[a] = (g.plane(a, cell[a] + 1) - source[a]) / d[a];
      } else {
        t_axis[a] = -std::numeric_limits<double>::infinity();
      }
      t_star = std::max(t_star, t_axis[a]);
    }
    if (!(t_star > 0.0)) return;  // source lies inside the current cell
    for (int a = 0; a < 3; ++a) {
      if (t_axis[a] == t_star) cell[a] += d[a] > 0.0 ? -1 : 1;
    }
    if (!g.contains(cell)) return;
    if (!visit(static_cast<const Cell&>(cell))) return;
  }
}

}  // namespace voxelcast
