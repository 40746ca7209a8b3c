#pragma once

#include <array>

#include "voxelcast/autodiff/tensor.hpp"

// Layout is channels-last throughout: 2D feature maps are (N, H, W, C) and
// volumes are (N, H, W, D, C). Kernels are (KH, KW, Cin, Cout) and
// (KH, KW, KD, Cin, Cout).

namespace voxelcast::ad {

enum class ConvAlgorithm {
  direct,  ///< plain loop nest
  im2col,  ///< patch matrix times weight matrix (GEMM)
};

struct ConvOptions {
  int stride = 1;
  int padding = 0;
  ConvAlgorithm algorithm = ConvAlgorithm::im2col;
};

/// Cross-correlation. Output spatial size per axis is
/// floor((n + 2p - k) / s) + 1. `bias` may be undefined.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, const ConvOptions& opt = {});
template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, const ConvOptions& opt = {});

/// (H, W, D, C) -> (H, W, D*C), or batched (N, H, W, D, C) -> (N, H, W, D*C).
/// Element (.., i, j, k, l) lands at (.., i, j, k*C + l); memory is unchanged.
template <class T>
Tensor<T> reshape_projection(const Tensor<T>& x);

/// Any shape with the same element count; memory is unchanged.
template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// x: (N, In), weight: (In, Out), bias: (Out) or undefined.
template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <class T>
Tensor<T> relu(const Tensor<T>& x);
template <class T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Running statistics for batchnorm eval mode.
template <class T>
struct BatchNormState {
  std::vector<T> mean;
  std::vector<T> var;
  explicit BatchNormState(std::size_t channels = 0) : mean(channels, T(0)), var(channels, T(1)) {}
};

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.9;  ///< running = momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
};

/// Normalises every channel (last axis) over all other axes. Training mode
/// uses batch statistics (biased variance) and updates `state`; eval mode
/// uses `state`.
template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                    const BatchNormOptions& opt = {});

/// (N, H, W, C) -> (N, factor*H, factor*W, C).
template <class T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor = 2);

/// (N, H, W, C) -> (N, H/2, W/2, C), mean over 2x2 blocks.
template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x);

/// Concatenates along the last axis; leading axes must agree.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts);

/// (N, C) -> (N, H, W, C), the vector repeated at every position.
template <class T>
Tensor<T> tile(const Tensor<T>& v, std::size_t height, std::size_t width);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <class T>
Tensor<T> sum(const Tensor<T>& a);
/// Sum of a * weights for a constant weight vector; handy for gradient checks.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& a, std::span<const T> weights);

/// mean(|a - b|)
template <class T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b);
/// ||a - b||_2 / sqrt(numel): the L2 norm on a per-element scale. Gradient
/// is taken as zero when a == b.
template <class T>
Tensor<T> l2_feature_loss(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace voxelcast::ad
