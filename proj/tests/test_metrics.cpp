#include <doctest.h>

#include "voxelcast/metrics.hpp"

using namespace voxelcast;

namespace {

Image random_image(Rng& rng, int w, int h) {
  Image im(w, h, 3);
  for (auto& v : im.data()) v = static_cast<float>(rng.uniform());
  return im;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("SSIM of two constant images has a closed form") {
  for (auto [p, q] : {std::pair{0.2f, 0.7f}, std::pair{0.5f, 0.5f}, std::pair{0.0f, 1.0f}}) {
    const Image a(24, 20, 3, p), b(24, 20, 3, q);
    const double c1 = 1e-4;
    const double expected = (2.0 * p * q + c1) / (double(p) * p + double(q) * q + c1);
    CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("metrics are symmetric and zero on identical input") {
  Rng rng(1);
  const Image a = random_image(rng, 32, 32), b = random_image(rng, 32, 32);
  const ImageMetrics ab = eval_metrics(a, b), ba = eval_metrics(b, a);
  CHECK(ab.mse == doctest::Approx(ba.mse));
  CHECK(ab.dssim == doctest::Approx(ba.dssim));
  CHECK(ab.perceptual == doctest::Approx(ba.perceptual));
  const ImageMetrics aa = eval_metrics(a, a);
  CHECK(aa.mse == 0.0);
  CHECK(aa.dssim == 0.0);
  CHECK(aa.perceptual == 0.0);
}

TEST_CASE("MSE is on the 0-255 scale") {
  const Image a(16, 16, 3, 0.0f), b(16, 16, 3, 1.0f);
  CHECK(mse_255(a, b) == doctest::Approx(255.0 * 255.0));
}

TEST_CASE("more noise means larger distances") {
  Rng rng(2);
  const Image base = random_image(rng, 32, 32);
  Image small = base, large = base;
  for (std::size_t i = 0; i < base.data().size(); ++i) {
    const double n = rng.normal();
    small.data()[i] = static_cast<float>(std::clamp(base.data()[i] + 0.02 * n, 0.0, 1.0));
    large.data()[i] = static_cast<float>(std::clamp(base.data()[i] + 0.2 * n, 0.0, 1.0));
  }
  const ImageMetrics s = eval_metrics(small, base), l = eval_metrics(large, base);
  CHECK(s.mse < l.mse);
  CHECK(s.dssim < l.dssim);
  CHECK(s.perceptual < l.perceptual);
}

TEST_CASE("shape mismatch and tiny images are rejected") {
  CHECK_THROWS(eval_metrics(Image(16, 16), Image(16, 12)));
  CHECK_THROWS(ssim(Image(8, 8), Image(8, 8)));
}

}  // TEST_SUITE
