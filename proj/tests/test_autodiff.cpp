#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "support/gradient_suite.hpp"
#include "voxelcast/autodiff/optim.hpp"

using namespace voxelcast;
using namespace voxelcast::ad;
using voxelcast::testing::DTensor;
using voxelcast::testing::random_values;

TEST_SUITE("autodiff") {

TEST_CASE("1x1 unit kernel is the identity") {
  Rng rng(1);
  const Shape xs{2, 4, 5, 1};
  const auto x = DTensor::constant(xs, random_values(rng, numel(xs)));
  for (auto algo : {ConvAlgorithm::direct, ConvAlgorithm::im2col}) {
    const auto y = conv2d(x, DTensor::constant({1, 1, 1, 1}, {1.0}), DTensor(), {1, 0, algo});
    CHECK(y.shape() == xs);
    CHECK(std::equal(y.values().begin(), y.values().end(), x.values().begin()));
  }
}

TEST_CASE("all-ones 3x3 kernel on a delta gives a 3x3 block of ones") {
  std::vector<double> delta(7 * 7, 0.0);
  delta[3 * 7 + 3] = 1.0;
  const auto x = DTensor::constant({1, 7, 7, 1}, delta);
  const auto y = conv2d(x, DTensor::constant({3, 3, 1, 1}, std::vector<double>(9, 1.0)), DTensor(), {1, 1});
  REQUIRE(y.shape() == Shape{1, 7, 7, 1});
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      const bool inside = std::abs(i - 3) <= 1 && std::abs(j - 3) <= 1;
      CHECK(y.values()[i * 7 + j] == (inside ? 1.0 : 0.0));
    }
}

TEST_CASE("conv output size follows floor((n + 2p - k) / s) + 1") {
  const auto x = DTensor::zeros({1, 9, 8, 7, 2});
  const auto y = conv3d(x, DTensor::zeros({3, 3, 3, 2, 4}), DTensor(), {2, 1});
  CHECK(y.shape() == Shape{1, 5, 4, 4, 4});
  const auto z = conv2d(DTensor::zeros({1, 10, 6, 2}), DTensor::zeros({4, 4, 2, 1}), DTensor(), {3, 0});
  CHECK(z.shape() == Shape{1, 3, 1, 1});
}

TEST_CASE("conv shape errors") {
  const auto x = DTensor::zeros({1, 4, 4, 3});
  CHECK_THROWS_AS(conv2d(x, DTensor::zeros({3, 3, 2, 1}), DTensor()), DimensionError);
  CHECK_THROWS_AS(conv2d(x, DTensor::zeros({3, 3, 3, 1}), DTensor(), {0, 0}), DimensionError);
  CHECK_THROWS_AS(conv2d(x, DTensor::zeros({3, 3, 3, 2}), DTensor::zeros({3})), DimensionError);
  CHECK_THROWS_AS(conv3d(x, DTensor::zeros({3, 3, 3, 3, 1}), DTensor()), DimensionError);
  CHECK_THROWS_AS(conv2d(x, DTensor::zeros({7, 7, 3, 1}), DTensor()), DimensionError);
}

TEST_CASE("direct and im2col convolution agree to 1e-12") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = testing::pick(rng, 1, 4), o = testing::pick(rng, 1, 5), k = testing::pick(rng, 1, 3);
    const Shape xs{2, testing::pick(rng, 3, 7), testing::pick(rng, 3, 7), testing::pick(rng, 3, 6), c};
    const Shape ks{k, k, k, c, o};
    const auto x = DTensor::leaf(xs, random_values(rng, numel(xs)));
    const auto w = DTensor::leaf(ks, random_values(rng, numel(ks)));
    const auto b = DTensor::leaf({o}, random_values(rng, o));
    const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 1);
    const auto weights = random_values(rng, 10000);
    std::vector<std::vector<double>> grads[2];
    std::vector<double> outs[2];
    for (int a = 0; a < 2; ++a) {
      x.node().grad.clear();
      w.node().grad.clear();
      b.node().grad.clear();
      const auto y = conv3d(x, w, b, {stride, pad, a ? ConvAlgorithm::im2col : ConvAlgorithm::direct});
      outs[a].assign(y.values().begin(), y.values().end());
      weighted_sum<double>(y, std::span<const double>(weights.data(), y.size())).backward();
      for (const auto* t : {&x, &w, &b}) grads[a].emplace_back(t->grad().begin(), t->grad().end());
    }
    auto rel = [](const std::vector<double>& p, const std::vector<double>& q) {
      double worst = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i)
        worst = std::max(worst, std::abs(p[i] - q[i]) / std::max(1.0, std::abs(q[i])));
      return worst;
    };
    CHECK(rel(outs[0], outs[1]) < 1e-12);
    for (int g = 0; g < 3; ++g) CHECK(rel(grads[0][g], grads[1][g]) < 1e-12);
  }
}

TEST_CASE("every op passes finite-difference checks on 20 random shapes") {
  Rng rng(2024);
  for (const auto& [name, run] : testing::op_cases()) {
    for (int i = 0; i < 20; ++i) {
      const auto r = run(rng);
      INFO(name << " case " << i);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("reshape_projection layout and round trip") {
  std::vector<double> v(2 * 2 * 3 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 0.5;
  const auto x = DTensor::leaf({2, 2, 3, 4}, v);
  const auto y = reshape_projection(x);
  REQUIRE(y.shape() == Shape{2, 2, 12});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 4; ++l)
          CHECK(y.values()[(i * 2 + j) * 12 + k * 4 + l] == v[((i * 2 + j) * 3 + k) * 4 + l]);
  const auto back = reshape(y, {2, 2, 3, 4});
  CHECK(std::equal(back.values().begin(), back.values().end(), v.begin()));
  sum(back).backward();
  REQUIRE(x.grad().size() == v.size());
  CHECK(std::all_of(x.grad().begin(), x.grad().end(), [](double g) { return g == 1.0; }));
  CHECK_THROWS_AS(reshape_projection(DTensor::zeros({2, 3, 4})), DimensionError);
}

TEST_CASE("relu and batchnorm definitions") {
  const auto r = relu(DTensor::constant({4}, {-2.0, -0.5, 0.5, 3.0}));
  CHECK(std::vector<double>(r.values().begin(), r.values().end()) == std::vector<double>{0, 0, 0.5, 3.0});

  Rng rng(5);
  const Shape xs{3, 4, 5, 2};
  BatchNormState<double> state(2);
  const auto y = batchnorm(DTensor::constant(xs, random_values(rng, numel(xs), -3, 5)),
                           DTensor::constant({2}, {1.0, 1.0}), DTensor::constant({2}, {0.0, 0.0}), state);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, s = 0;
    const std::size_t n = y.size() / 2;
    for (std::size_t i = 0; i < n; ++i) m += y.values()[i * 2 + c];
    m /= n;
    for (std::size_t i = 0; i < n; ++i) s += std::pow(y.values()[i * 2 + c] - m, 2);
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(s / n - 1.0) < 1e-5);
  }
  // Running statistics move 10% of the way to the batch statistics.
  CHECK(state.mean[0] != 0.0);
  CHECK(state.var[0] != 1.0);
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  BatchNormState<double> state(1);
  state.mean[0] = 2.0;
  state.var[0] = 4.0;
  BatchNormOptions opt;
  opt.training = false;
  opt.eps = 0.0;
  const auto y = batchnorm(DTensor::constant({1, 1, 2, 1}, {2.0, 6.0}), DTensor::constant({1}, {3.0}),
                           DTensor::constant({1}, {1.0}), state, opt);
  CHECK(y.values()[0] == doctest::Approx(1.0));
  CHECK(y.values()[1] == doctest::Approx(7.0));
  CHECK(state.mean[0] == 2.0);
}

TEST_CASE("tile, concat, upsample shapes and errors") {
  const auto v = DTensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto t = tile(v, 2, 2);
  CHECK(t.shape() == Shape{2, 2, 2, 3});
  CHECK(t.values()[3 * 3 + 2] == 3.0);
  CHECK(t.values()[4 * 3] == 4.0);
  CHECK_THROWS_AS(concat<double>({DTensor::zeros({1, 2, 2, 1}), DTensor::zeros({1, 3, 2, 1})}), DimensionError);
  CHECK(concat<double>({DTensor::zeros({1, 2, 2, 1}), DTensor::zeros({1, 2, 2, 3})}).shape() == Shape{1, 2, 2, 4});
  CHECK(upsample_nearest(DTensor::zeros({1, 3, 2, 5})).shape() == Shape{1, 6, 4, 5});
  CHECK_THROWS_AS(add(DTensor::zeros({2}), DTensor::zeros({3})), DimensionError);
  CHECK_THROWS_AS(dense(DTensor::zeros({2, 3}), DTensor::zeros({4, 1}), DTensor()), DimensionError);
  CHECK_THROWS_AS(l1_loss(DTensor::zeros({2}), DTensor::zeros({3})), DimensionError);
}

TEST_CASE("l1_loss is zero on equal inputs and symmetric") {
  Rng rng(3);
  const auto a = DTensor::constant({10}, random_values(rng, 10));
  const auto b = DTensor::constant({10}, random_values(rng, 10));
  CHECK(l1_loss(a, a).item() == 0.0);
  CHECK(l1_loss(a, b).item() == l1_loss(b, a).item());
  CHECK(l2_feature_loss(a, a).item() == 0.0);
}

TEST_CASE("forward passes are deterministic") {
  Rng rng(9);
  const Shape xs{2, 6, 6, 6, 3}, ks{3, 3, 3, 3, 4};
  const auto x = DTensor::constant(xs, random_values(rng, numel(xs)));
  const auto w = DTensor::constant(ks, random_values(rng, numel(ks)));
  const auto y1 = conv3d(x, w, DTensor(), {2, 1});
  const auto y2 = conv3d(x, w, DTensor(), {2, 1});
  CHECK(std::equal(y1.values().begin(), y1.values().end(), y2.values().begin()));
}

TEST_CASE("adam: zero gradient leaves parameters and counts the step") {
  ParameterStore store;
  store.add("w", {3}, {1.0f, -2.0f, 0.5f});
  adam_step(store, {});
  CHECK(store.step == 1);
  const auto v = store.get("w").values();
  CHECK(std::vector<float>(v.begin(), v.end()) == std::vector<float>{1.0f, -2.0f, 0.5f});
}

TEST_CASE("adam: constant gradient converges to steps of size lr") {
  // With constant g, m_t / (1 - b1^t) = g and v_t / (1 - b2^t) = g^2 exactly,
  // so every bias-corrected step is lr * g / (|g| + eps).
  ParameterStore store;
  store.add("w", {1}, {0.0f});
  AdamOptions opt;
  opt.lr = 1e-3;
  const float g = 0.37f;
  double prev = 0.0;
  for (int t = 1; t <= 200; ++t) {
    store.get("w").mutable_grad()[0] = g;
    adam_step(store, opt);
    const double w = store.get("w").values()[0];
    const double expected = opt.lr * g / (std::abs(g) + opt.eps);
    CHECK(std::abs(std::abs(w - prev) - expected) < 1e-6);
    prev = w;
    CHECK(store.get("w").grad().empty());
  }
}

TEST_CASE("adam: quadratic bowl loss decreases for 100 steps") {
  ParameterStore store;
  store.add("w", {4}, {1.0f, -0.7f, 0.4f, 2.0f});
  AdamOptions opt;
  opt.lr = 1e-3;
  const auto target = Tensor<float>::constant({4}, {0.1f, 0.2f, -0.3f, 0.5f});
  double last = 1e30;
  for (int i = 0; i < 100; ++i) {
    const auto d = add(store.get("w"), scale(target, -1.0f));
    const auto loss = weighted_sum<float>(d, std::vector<float>(d.values().begin(), d.values().end()));
    CHECK(loss.item() < last);
    last = loss.item();
    loss.backward();
    adam_step(store, opt);
  }
}

TEST_CASE("checkpoint round trip and mismatch detection") {
  const auto dir = std::filesystem::temp_directory_path() / "voxelcast_ckpt_test";
  std::filesystem::create_directories(dir);
  ParameterStore a;
  a.add("conv.w", {2, 3}, {1, 2, 3, 4, 5, 6});
  a.add("conv.b", {3}, {-1, 0, 1});
  auto& bn = a.batchnorm_state("bn", 3);
  bn.mean = {0.5f, 0.25f, 0.125f};
  save_checkpoint(dir / "a.ckpt", a, "step=4\n");

  ParameterStore b;
  b.add("conv.w", {2, 3}, std::vector<float>(6, 0.0f));
  b.add("conv.b", {3}, std::vector<float>(3, 0.0f));
  b.batchnorm_state("bn", 3);
  CHECK(load_checkpoint(dir / "a.ckpt", b) == "step=4\n");
  CHECK(std::equal(b.get("conv.w").values().begin(), b.get("conv.w").values().end(),
                   a.get("conv.w").values().begin()));
  CHECK(b.batchnorm_states().at("bn").mean == bn.mean);

  ParameterStore c;
  c.add("conv.w", {3, 2}, std::vector<float>(6, 0.0f));
  c.add("conv.b", {3}, std::vector<float>(3, 0.0f));
  c.batchnorm_state("bn", 3);
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", c), FormatError);
  std::filesystem::remove_all(dir);
}

}
