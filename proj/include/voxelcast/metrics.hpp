#pragma once

#include <vector>

#include "voxelcast/image.hpp"
#include "voxelcast/nvr.hpp"

namespace voxelcast {

struct ImageMetrics {
  double mse = 0.0;         ///< on the 0-255 scale
  double dssim = 0.0;       ///< (1 - SSIM) / 2
  double perceptual = 0.0;  ///< sum_i w_i * feature distance
};

/// Mean squared error over all channels with values scaled to 0-255.
double mse_255(const Image& a, const Image& b);

/// Mean SSIM over the valid region (no padding) of an 11x11 Gaussian window,
/// sigma 1.5, C1 = 0.01^2, C2 = 0.03^2 for values in [0, 1], averaged over
/// channels. Both sides must be at least 11 pixels.
double ssim(const Image& a, const Image& b);
inline double dssim(const Image& a, const Image& b) { return (1.0 - ssim(a, b)) / 2.0; }

/// Feature term of the training loss, evaluated in double precision.
double perceptual_distance(const Image& a, const Image& b, const std::vector<double>& weights = {1.0, 0.1});

/// All three metrics; images must match in shape and have 3 channels.
ImageMetrics eval_metrics(const Image& predicted, const Image& target);

}  // namespace voxelcast
