#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "voxelcast/metrics.hpp"
#include "voxelcast/nvr.hpp"
#include "voxelcast/scene.hpp"

namespace voxelcast {

/// One training/evaluation example held in memory. The voxel input is kept
/// sparse: flat indices into the (R, R, R) network grid plus RGB per entry.
struct TrainingSample {
  int resolution = 0;
  std::vector<std::uint32_t> occupied;
  std::vector<float> colors;
  Vec3 light = Vec3::Zero();  ///< camera frame
  Image splat;
  Image target;

  /// Builds the network input from a scene: assemble, resample into the
  /// camera frame, and convert the light.
  static TrainingSample from_scene(const Scene& scene, Image splat, Image target);
};

/// Stacks samples into network inputs.
NvrInputs make_inputs(const std::vector<const TrainingSample*>& batch, const NvrConfig& config);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainLogRow {
  int step = 0;
  double l1 = 0.0;
  double perceptual = 0.0;
  double total = 0.0;
  /// NaN on steps without a validation pass.
  double val_mse = std::numeric_limits<double>::quiet_NaN();
  double val_dssim = std::numeric_limits<double>::quiet_NaN();
};

struct TrainOptions {
  int steps = 2000;
  int batch_size = 10;
  ad::AdamOptions adam{};
  LossWeights loss{};
  std::uint64_t seed = 0;
  int eval_every = 250;       ///< 0 disables validation
  std::size_t val_limit = 0;  ///< 0 = whole validation set
  std::filesystem::path log_csv;          ///< empty = no file
  std::filesystem::path best_checkpoint;  ///< empty = not saved
  std::function<void(const TrainLogRow&)> on_log;
};

struct TrainReport {
  std::vector<TrainLogRow> rows;
  /// Mean batch loss over the first and last `kLossWindow` steps.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double best_val_mse = std::numeric_limits<double>::infinity();
  int best_step = -1;
  static constexpr int kLossWindow = 10;
};

/// Minibatch Adam on nvr_loss. Batches come from per-epoch shuffles
/// seeded by `seed`, so a fixed seed reproduces the loss curve exactly.
/// Throws TrainingError on an empty dataset or a non-finite loss.
TrainReport train(NvrModel& model, const std::vector<TrainingSample>& train_set,
                  const std::vector<TrainingSample>& val_set, const TrainOptions& options);

/// Mean target color of a dataset, fed to NvrModel::set_output_bias before
/// the first step. Kept outside train() so train() only moves parameters
/// through the optimizer.
Color mean_target_color(const std::vector<TrainingSample>& samples);

/// Eval-mode predictions, in sample order.
std::vector<Image> infer(NvrModel& model, const std::vector<const TrainingSample*>& samples,
                         std::size_t batch_size = 16);
Image infer(NvrModel& model, const TrainingSample& sample);

struct EvalSummary {
  std::vector<ImageMetrics> per_sample;
  ImageMetrics mean;
};
EvalSummary summarize(const std::vector<ImageMetrics>& metrics);

/// Model predictions against targets.
EvalSummary evaluate(NvrModel& model, const std::vector<const TrainingSample*>& samples);
/// Raw splat images against targets.
EvalSummary evaluate_splats(const std::vector<const TrainingSample*>& samples);

}  // namespace voxelcast
