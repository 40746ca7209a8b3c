#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "voxelcast/autodiff/optim.hpp"
#include "voxelcast/camera.hpp"
#include "voxelcast/image.hpp"
#include "voxelcast/kv_document.hpp"
#include "voxelcast/voxel_grid.hpp"

namespace voxelcast {

/// Network shape. The voxel branch halves the grid once per encoder stage;
/// the decoder doubles the feature map once per stage up to the image size.
struct NvrConfig {
  int voxel_resolution = 32;
  int voxel_channels = 4;  ///< RGB + occupancy
  int image_size = 64;
  std::vector<int> encoder3d{8, 16, 32};
  int projection_channels = 64;
  int bottleneck_blocks = 2;
  int light_hidden = 32;
  int light_embedding = 64;
  std::vector<int> decoder{64, 32, 16, 16};
  int splat_channels = 16;  ///< must equal decoder.back()
  int splat_layers = 4;
  std::vector<int> unet{16, 32, 64};
  bool plus = true;

  /// Grid side after the voxel encoder.
  int feature_resolution() const;
  /// Throws DomainError when the stride/upsample chain does not reach
  /// image_size or a width is non-positive.
  void validate() const;

  void write(KeyValueDocument& doc) const;
  /// Keys under "nvr."; absent keys keep their defaults.
  static NvrConfig read(const KeyValueDocument& doc);
};

/// Training loss weights: loss = ||I - T||_1 + beta * sum_i w_i ||v_i(I) - v_i(T)||_2.
struct LossWeights {
  double beta = 1.0;
  std::vector<double> w{1.0, 0.1};
  void validate() const;
};

/// Frozen two-stage conv feature stack standing in for pretrained image
/// features: conv(3->16)+relu+avgpool, then conv(16->32)+relu+avgpool. The
/// weights are drawn once from a fixed seed.
template <class T>
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::uint64_t seed = kDefaultSeed);
  /// images (N, H, W, 3) -> one tensor per stage.
  std::vector<ad::Tensor<T>> features(const ad::Tensor<T>& images) const;
  /// Kernels and biases: {w1, b1, w2, b2}.
  std::vector<ad::Tensor<T>> weights() const { return {w1_, b1_, w2_, b2_}; }

  static constexpr std::uint64_t kDefaultSeed = 0x5EEDF00DULL;

 private:
  ad::Tensor<T> w1_, b1_, w2_, b2_;
};

template <class T>
struct LossTerms {
  ad::Tensor<T> total;
  double l1 = 0.0;
  double perceptual = 0.0;  ///< sum_i w_i * feature distance, before beta
};

/// Training loss on (N, H, W, 3) tensors. Differentiable w.r.t. `predicted`.
template <class T>
LossTerms<T> nvr_loss(const ad::Tensor<T>& predicted, const ad::Tensor<T>& target, const LossWeights& weights,
                      const FeatureExtractor<T>& extractor);

/// Light position in the camera frame used by the voxel tensor: components
/// along (right, up, forward), relative to the look-at point.
Vec3 camera_frame_light(const Vec3& light, const Camera& camera);

/// Dense network input (R, R, R, 4) from a camera-frame grid: axis 0 runs
/// top to bottom, axis 1 left to right, axis 2 near to far; channels are
/// RGB and occupancy.
std::vector<float> voxel_tensor(const VoxelGrid& camera_grid);

/// Images (N, H, W, C) <-> tensors.
ad::Tensor<float> images_to_tensor(const std::vector<const Image*>& images);
Image tensor_to_image(const ad::Tensor<float>& t, std::size_t index);

struct NvrInputs {
  ad::Tensor<float> voxels;  ///< (N, R, R, R, 4)
  ad::Tensor<float> light;   ///< (N, 3), camera frame
  ad::Tensor<float> splat;   ///< (N, H, W, 3), NVR+ only
};

/// NVR and NVR+ networks with parameters in a ParameterStore.
class NvrModel {
 public:
  NvrModel(NvrConfig config, std::uint64_t seed);

  const NvrConfig& config() const { return config_; }
  ad::ParameterStore& parameters() { return store_; }
  const ad::ParameterStore& parameters() const { return store_; }

  /// RGB image in [0, 1], (N, H, W, 3). `training` selects batch statistics
  /// in batchnorm and updates the running averages.
  ad::Tensor<float> forward(const NvrInputs& in, bool training);

  /// Decoder output of the NVR part at full resolution, (N, H, W, C).
  ad::Tensor<float> nvr_features(const NvrInputs& in, bool training);

  /// Ablation hook: when set, the Splatting Processing Network output is
  /// replaced by zeros, so NVR+ sees only the NVR features.
  bool zero_splat_features = false;

  /// Sets the output head bias to the logit of `mean` (clamped to
  /// [0.01, 0.99]), so the untrained network starts near that color.
  void set_output_bias(const Color& mean);

  void save(const std::filesystem::path& path, const std::string& metadata = {}) const;
  /// Reads the config from the checkpoint metadata and loads the weights.
  static NvrModel load(const std::filesystem::path& path);

 private:
  ad::Tensor<float> conv_block(const ad::Tensor<float>& x, const std::string& name, bool training, int stride = 1,
                               int padding = 1);
  ad::Tensor<float> conv(const ad::Tensor<float>& x, const std::string& name, int stride, int padding);
  void add_conv(const std::string& name, std::vector<std::size_t> kernel_shape, bool bias, bool batchnorm);
  void add_dense(const std::string& name, int in, int out);

  NvrConfig config_;
  ad::ParameterStore store_;
  Rng init_rng_;
};

}  // namespace voxelcast
