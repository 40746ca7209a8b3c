#include <doctest.h>

#include <cmath>

#include "support/fixtures.hpp"
#include "voxelcast/nvr.hpp"

using namespace voxelcast;
using voxelcast::testing::quick_sample;
using voxelcast::testing::TempDir;

namespace {

NvrInputs inputs_for(const std::vector<const TrainingSample*>& batch, const NvrConfig& config) {
  return make_inputs(batch, config);
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
  return m;
}

}  // namespace

TEST_SUITE("nvr") {

TEST_CASE("output shape and range") {
  const TrainingSample a = quick_sample(1), b = quick_sample(2);
  for (bool plus : {true, false}) {
    NvrConfig config;
    config.plus = plus;
    NvrModel model(config, 3);
    const auto out = model.forward(inputs_for({&a, &b}, config), false);
    CHECK(out.shape() == ad::Shape{2, 64, 64, 3});
    for (float v : out.values()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("the splat branch adds parameters") {
  NvrConfig nvr;
  nvr.plus = false;
  CHECK(NvrModel(NvrConfig{}, 1).parameters().parameter_count() > NvrModel(nvr, 1).parameters().parameter_count());
}

TEST_CASE("an empty voxel input still gives a valid image") {
  TrainingSample s = quick_sample(4);
  s.occupied.clear();
  s.colors.clear();
  NvrModel model(NvrConfig{}, 5);
  const auto out = model.forward(inputs_for({&s}, model.config()), false);
  for (float v : out.values()) CHECK(std::isfinite(v));
}

TEST_CASE("gradient reaches every parameter") {
  const TrainingSample s = quick_sample(6);
  for (bool plus : {true, false}) {
    NvrConfig config;
    config.plus = plus;
    NvrModel model(config, 7);
    const FeatureExtractor<float> fe;
    const auto out = model.forward(inputs_for({&s}, config), true);
    const auto target = images_to_tensor({&s.target});
    nvr_loss(out, target, LossWeights{}, fe).total.backward();
    for (const auto& e : model.parameters().entries()) {
      const auto g = e.tensor.grad();
      INFO(e.name);
      REQUIRE(g.size() == e.tensor.size());
      CHECK(std::any_of(g.begin(), g.end(), [](float v) { return v != 0.0f; }));
    }
  }
}

TEST_CASE("zeroing the splat features removes the splat's influence") {
  TrainingSample a = quick_sample(8);
  TrainingSample b = a;
  for (auto& v : b.splat.data()) v = 1.0f - v;
  NvrModel model(NvrConfig{}, 9);
  const auto base = model.forward(inputs_for({&a}, model.config()), false);
  const auto swapped = model.forward(inputs_for({&b}, model.config()), false);
  CHECK(max_abs_diff(base.values(), swapped.values()) > 1e-4);
  model.zero_splat_features = true;
  const auto za = model.forward(inputs_for({&a}, model.config()), false);
  const auto zb = model.forward(inputs_for({&b}, model.config()), false);
  CHECK(max_abs_diff(za.values(), zb.values()) == 0.0);
}

TEST_CASE("the light input changes the prediction") {
  const TrainingSample a = quick_sample(10, Vec3(-1.0, 2.6, 0.5));
  TrainingSample b = a;
  b.light = quick_sample(10, Vec3(1.2, 2.9, -1.0)).light;
  NvrConfig config;
  config.plus = false;
  NvrModel model(config, 11);
  const auto pa = model.forward(inputs_for({&a}, config), false);
  const auto pb = model.forward(inputs_for({&b}, config), false);
  CHECK(max_abs_diff(pa.values(), pb.values()) > 1e-5);
}

TEST_CASE("loss of a target against itself is zero") {
  const TrainingSample s = quick_sample(12);
  const auto t = images_to_tensor({&s.target});
  const FeatureExtractor<float> fe;
  const auto terms = nvr_loss(t, t, LossWeights{}, fe);
  CHECK(terms.total.item() == 0.0f);
  CHECK(terms.l1 == 0.0);
  CHECK(terms.perceptual == 0.0);
}

TEST_CASE("with beta 0 the loss is the mean absolute error") {
  Rng rng(13);
  std::vector<double> p(2 * 8 * 8 * 3), q(p.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform();
    q[i] = rng.uniform();
    l1 += std::abs(p[i] - q[i]);
  }
  l1 /= static_cast<double>(p.size());
  const auto pt = ad::Tensor<double>::constant({2, 8, 8, 3}, p), qt = ad::Tensor<double>::constant({2, 8, 8, 3}, q);
  LossWeights w;
  w.beta = 0.0;
  const FeatureExtractor<double> fe;
  const auto terms = nvr_loss(pt, qt, w, fe);
  CHECK(terms.total.item() == doctest::Approx(l1).epsilon(1e-12));
  w.beta = 2.0;
  const auto weighted = nvr_loss(pt, qt, w, fe);
  CHECK(weighted.perceptual > 0.0);
  CHECK(weighted.total.item() == doctest::Approx(l1 + 2.0 * weighted.perceptual).epsilon(1e-12));
}

TEST_CASE("output bias moves the initial prediction toward the given color") {
  const TrainingSample s = quick_sample(14);
  NvrModel model(NvrConfig{}, 15);
  model.set_output_bias(Color(0.9f, 0.1f, 0.5f));
  const auto out = model.forward(inputs_for({&s}, model.config()), false);
  double mean[3] = {0, 0, 0};
  for (std::size_t i = 0; i < out.size(); ++i) mean[i % 3] += out.values()[i];
  const double n = out.size() / 3.0;
  CHECK(mean[0] / n > 0.6);
  CHECK(mean[1] / n < 0.4);
  CHECK(mean[0] > mean[2]);
  CHECK(mean[2] > mean[1]);
}

TEST_CASE("checkpoint round trip reproduces predictions") {
  TempDir dir("nvr");
  const TrainingSample s = quick_sample(16);
  for (bool plus : {true, false}) {
    NvrConfig config;
    config.plus = plus;
    NvrModel model(config, 17);
    model.save(dir / "m.ckpt");
    NvrModel loaded = NvrModel::load(dir / "m.ckpt");
    CHECK(loaded.config().plus == plus);
    const auto a = model.forward(inputs_for({&s}, config), false);
    const auto b = loaded.forward(inputs_for({&s}, config), false);
    CHECK(max_abs_diff(a.values(), b.values()) == 0.0);
  }
}

}  // TEST_SUITE
