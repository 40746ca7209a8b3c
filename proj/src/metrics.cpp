#include "voxelcast/metrics.hpp"

#include <cmath>

namespace voxelcast {

namespace {

void require_same(const Image& a, const Image& b) {
  if (!a.same_shape(b))
    throw DimensionError("images differ in shape: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         "x" + std::to_string(a.channels()) + " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + "x" + std::to_string(b.channels()));
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_taps() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

/// Valid-region separable Gaussian filter of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& g) {
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * plane[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double mse_255(const Image& a, const Image& b) {
  require_same(a, b);
  const auto da = a.data(), db = b.data();
  if (da.empty()) throw DimensionError("empty image");
  double s = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = 255.0 * (static_cast<double>(da[i]) - db[i]);
    s += d * d;
  }
  return s / static_cast<double>(da.size());
}

double ssim(const Image& a, const Image& b) {
  require_same(a, b);
  const int w = a.width(), h = a.height();
  if (w < kWindow || h < kWindow) throw DimensionError("SSIM needs images of at least 11x11 pixels");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const std::vector<double> g = gaussian_taps();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data()[i * a.channels() + c];
      y[i] = b.data()[i * b.channels() + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, g), my = filter_valid(y, w, h, g);
    const auto sxx = filter_valid(xx, w, h, g), syy = filter_valid(yy, w, h, g), sxy = filter_valid(xy, w, h, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / a.channels();
}

double perceptual_distance(const Image& a, const Image& b, const std::vector<double>& weights) {
  require_same(a, b);
  if (a.channels() != 3) throw DimensionError("perceptual distance needs RGB images");
  static const FeatureExtractor<double> extractor;
  auto to_tensor = [](const Image& im) {
    return ad::Tensor<double>::constant(
        {1, static_cast<std::size_t>(im.height()), static_cast<std::size_t>(im.width()), 3},
        std::vector<double>(im.data().begin(), im.data().end()));
  };
  const auto fa = extractor.features(to_tensor(a));
  const auto fb = extractor.features(to_tensor(b));
  if (weights.size() > fa.size()) throw DomainError("more weights than feature stages");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * ad::l2_feature_loss(fa[i], fb[i]).item();
  return total;
}

ImageMetrics eval_metrics(const Image& predicted, const Image& target) {
  return {mse_255(predicted, target), dssim(predicted, target), perceptual_distance(predicted, target)};
}

}  // namespace voxelcast
