#pragma once

#include <cstdint>
#include <string>

#include "voxelcast/scene.hpp"

namespace voxelcast {

enum class AppearanceSetting { single_color, default_parts, textured };

std::string to_string(AppearanceSetting s);
/// Accepts "single_color", "default_parts", "textured".
AppearanceSetting parse_appearance_setting(const std::string& name);

enum class Split { train, test };
std::string to_string(Split s);

struct ObjectOptions {
  int resolution = 24;
  /// Primitives are clipped to a vertical cylinder of this radius (voxels)
  /// around the grid axis, so posed objects stay inside the scene.
  double max_radius = 8.0;
  int min_primitives = 3;
  int max_primitives = 8;
};

/// Union of random boxes, vertical cylinders and ellipsoids, mirror
/// symmetric across the x center plane, reduced to the 6-connected component
/// that rests on y = 0. Colors follow `setting`: one color, one color per
/// primitive pair, or a two-color stripe/checker/noise pattern whose scale
/// and orientation ranges differ between the train and test splits.
/// Placed in the object frame for the given scene layout.
VoxelGrid generate_object(std::uint64_t seed, AppearanceSetting setting, Split split = Split::train,
                          const ObjectOptions& options = {}, const SceneLayout& layout = {});

/// Number of 6-connected components among occupied voxels.
int connected_components(const VoxelGrid& grid);

}  // namespace voxelcast
