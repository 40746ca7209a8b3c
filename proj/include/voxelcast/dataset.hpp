#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "voxelcast/kv_document.hpp"
#include "voxelcast/oracle.hpp"
#include "voxelcast/procedural.hpp"
#include "voxelcast/scene.hpp"
#include "voxelcast/splatter.hpp"
#include "voxelcast/trainer.hpp"

namespace voxelcast {

/// Oracle render of a scene: assembled with its ground, lit by an area light
/// centered at `scene.light`.
Image render_scene(const Scene& scene, const RenderSettings& settings);

/// Splat of the object's colored voxels only; the ground slab stays empty.
SplatCanvas splat_scene(const Scene& scene, const SplatOptions& options = {});

/// Random ranges for one split. Train views are independent draws; test
/// objects sweep the rotation range in `rotation_step_deg` steps with
/// translation and light interpolated between two sampled endpoints.
struct SamplingSpec {
  Split split = Split::train;
  double elevation_min = 5.0;
  double elevation_max = 50.0;
  double rotation_min = -90.0;
  double rotation_max = 90.0;
  double translation = 0.5;  ///< half side of the tx, tz box
  double light_xz = 1.5;     ///< half side of the light x, z box
  double light_y_min = 2.5;
  double light_y_max = 3.0;
  int views_per_object = 5;
  double rotation_step_deg = 10.0;
  std::uint64_t rng_seed = 0;

  static SamplingSpec train_defaults(std::uint64_t seed);
  /// Elevation 15-45; views span the rotation range in 10 degree steps.
  static SamplingSpec test_defaults(std::uint64_t seed);

  /// Throws DomainError for empty or inverted ranges and for ranges outside
  /// the training envelope of Scene.
  void validate() const;
  void write(KeyValueDocument& doc, const std::string& prefix) const;
  static SamplingSpec read(const KeyValueDocument& doc, const std::string& prefix, SamplingSpec defaults);
};

/// One sampled view.
struct ViewSample {
  double elevation_deg = 0.0;
  double rotation_deg = 0.0;
  double tx = 0.0;
  double tz = 0.0;
  Vec3 light = Vec3::Zero();
};

/// All views of one object, in order. Deterministic in (spec, object_index).
std::vector<ViewSample> sample_views(const SamplingSpec& spec, std::size_t object_index);

/// Seed of the procedural object behind `object_index` in a split. Train and
/// test draw from disjoint streams, so no seed is shared between splits.
std::uint64_t object_seed(std::uint64_t seed, Split split, std::size_t object_index);

/// Index of the view whose render serves as the appearance source.
int source_view(const SamplingSpec& spec);

struct DatasetOptions {
  SamplingSpec spec;
  AppearanceSetting setting = AppearanceSetting::default_parts;
  int objects = 200;
  ObjectOptions object;
  RenderSettings render;
  SplatOptions splat;
  Camera camera;  ///< image size and lens; elevation is sampled
  /// Shared root seed. Object seeds and render noise derive from it; the
  /// split's own sampling seed is `spec.rng_seed`.
  std::uint64_t seed = 0;
};

/// Paths are relative to the manifest's directory.
struct ManifestRecord {
  Split split = Split::train;
  int object = 0;
  std::uint64_t object_seed = 0;
  int view = 0;
  int source_view = 0;
  std::string scene;
  std::string voxels;      ///< object grid with captured colors
  std::string albedo;      ///< object grid with generated colors
  std::string appearance;  ///< source image
  std::string splat;
  std::string depth;
  std::string target;
  Vec3 light = Vec3::Zero();
  double elevation_deg = 0.0;
  double rotation_deg = 0.0;
  double tx = 0.0;
  double tz = 0.0;
};

/// Text manifest. Lines are `key = value` settings, `record key=value ...`
/// samples, or comments starting with '#'. Vectors use comma separators.
struct DatasetManifest {
  Split split = Split::train;
  KeyValueDocument settings;
  std::vector<ManifestRecord> records;

  std::string serialize() const;
  static DatasetManifest parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);
};

std::string manifest_filename(Split split);

/// Throws FormatError when a referenced file is missing or does not parse.
void verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds one split under `out_dir` and writes its manifest there. Objects
/// are processed in parallel; each file is written atomically and the output
/// depends only on the options. Failed samples are logged through `log`;
/// more than 1% failures throws DatasetError.
DatasetManifest generate_dataset(const DatasetOptions& options, const std::filesystem::path& out_dir,
                                 const std::function<void(const std::string&)>& log = {});

/// Loads network samples for the records of a manifest. With a positive
/// `degrade` factor below 1, object grids are first passed through
/// degrade_resolution and the splat is recomputed from the degraded grid.
std::vector<TrainingSample> load_samples(const DatasetManifest& manifest, const std::filesystem::path& dir,
                                         double degrade = 1.0, const SplatOptions& splat = {});

}  // namespace voxelcast
