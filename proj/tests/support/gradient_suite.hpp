#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "voxelcast/nvr.hpp"

namespace voxelcast::testing {

struct OpGradientReport {
  std::string op;
  int shapes = 0;
  double worst = 0.0;
};

using OpCase = std::function<GradCheckResult(Rng&)>;

inline std::size_t pick(Rng& rng, int lo, int hi) { return static_cast<std::size_t>(rng.uniform_int(lo, hi)); }

/// One random-shape case per call for every op.
inline std::vector<std::pair<std::string, OpCase>> op_cases() {
  using namespace ad;
  std::vector<std::pair<std::string, OpCase>> cases;

  cases.emplace_back("conv2d", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 2), h = pick(rng, 3, 6), w = pick(rng, 3, 6), c = pick(rng, 1, 3),
                      o = pick(rng, 1, 3), k = pick(rng, 1, 3);
    ConvOptions opt;
    opt.stride = rng.uniform_int(1, 2);
    opt.padding = rng.uniform_int(0, static_cast<int>(k) / 2 + 1);
    opt.algorithm = rng.uniform() < 0.5 ? ConvAlgorithm::direct : ConvAlgorithm::im2col;
    const Shape xs{n, h, w, c}, ks{k, k, c, o}, bs{o};
    return grad_check([opt](const std::vector<DTensor>& in) { return conv2d(in[0], in[1], in[2], opt); },
                      {xs, ks, bs},
                      {random_values(rng, numel(xs)), random_values(rng, numel(ks)), random_values(rng, o)}, rng);
  });

  cases.emplace_back("conv3d", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 2), h = pick(rng, 2, 5), w = pick(rng, 2, 5), d = pick(rng, 2, 5),
                      c = pick(rng, 1, 3), o = pick(rng, 1, 3), k = pick(rng, 1, 3);
    ConvOptions opt;
    opt.stride = rng.uniform_int(1, 2);
    opt.padding = rng.uniform_int(0, 1);
    if (k > std::min({h, w, d}) + 2 * static_cast<std::size_t>(opt.padding)) opt.padding = 1;
    opt.algorithm = rng.uniform() < 0.5 ? ConvAlgorithm::direct : ConvAlgorithm::im2col;
    const Shape xs{n, h, w, d, c}, ks{k, k, k, c, o}, bs{o};
    return grad_check([opt](const std::vector<DTensor>& in) { return conv3d(in[0], in[1], in[2], opt); },
                      {xs, ks, bs},
                      {random_values(rng, numel(xs)), random_values(rng, numel(ks)), random_values(rng, o)}, rng);
  });

  cases.emplace_back("reshape_projection", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 4)};
    return grad_check([](const std::vector<DTensor>& in) { return reshape_projection(in[0]); }, {xs},
                      {random_values(rng, numel(xs))}, rng);
  });

  cases.emplace_back("dense", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 4), i = pick(rng, 1, 6), o = pick(rng, 1, 6);
    return grad_check([](const std::vector<DTensor>& in) { return dense(in[0], in[1], in[2]); },
                      {{n, i}, {i, o}, {o}},
                      {random_values(rng, n * i), random_values(rng, i * o), random_values(rng, o)}, rng);
  });

  cases.emplace_back("relu", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5), pick(rng, 1, 3)};
    return grad_check([](const std::vector<DTensor>& in) { return relu(in[0]); }, {xs},
                      {random_values(rng, numel(xs), -1.0, 1.0, 1e-2)}, rng);
  });

  cases.emplace_back("sigmoid", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5), pick(rng, 1, 3)};
    return grad_check([](const std::vector<DTensor>& in) { return sigmoid(in[0]); }, {xs},
                      {random_values(rng, numel(xs), -3.0, 3.0)}, rng);
  });

  cases.emplace_back("batchnorm", [](Rng& rng) {
    const std::size_t c = pick(rng, 1, 3);
    const Shape xs{pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 1, 4), c};
    const bool training = rng.uniform() < 0.75;
    return grad_check(
        [c, training, seed = rng.next_u64()](const std::vector<DTensor>& in) {
          BatchNormState<double> state(c);
          Rng r(seed);
          for (std::size_t j = 0; j < c; ++j) {
            state.mean[j] = r.uniform(-0.5, 0.5);
            state.var[j] = r.uniform(0.5, 2.0);
          }
          BatchNormOptions opt;
          opt.training = training;
          return batchnorm(in[0], in[1], in[2], state, opt);
        },
        {xs, {c}, {c}}, {random_values(rng, numel(xs)), random_values(rng, c, 0.5, 1.5), random_values(rng, c)},
        rng);
  });

  cases.emplace_back("upsample_nearest", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 2), pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 3)};
    const int f = rng.uniform_int(1, 3);
    return grad_check([f](const std::vector<DTensor>& in) { return upsample_nearest(in[0], f); }, {xs},
                      {random_values(rng, numel(xs))}, rng);
  });

  cases.emplace_back("avg_pool2", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 2), 2 * pick(rng, 1, 3), 2 * pick(rng, 1, 3), pick(rng, 1, 3)};
    return grad_check([](const std::vector<DTensor>& in) { return avg_pool2(in[0]); }, {xs},
                      {random_values(rng, numel(xs))}, rng);
  });

  cases.emplace_back("concat", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 2), h = pick(rng, 1, 4), w = pick(rng, 1, 4);
    const std::size_t parts = pick(rng, 2, 3);
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> values;
    for (std::size_t p = 0; p < parts; ++p) {
      shapes.push_back({n, h, w, pick(rng, 1, 4)});
      values.push_back(random_values(rng, numel(shapes.back())));
    }
    return grad_check([](const std::vector<DTensor>& in) { return concat(in); }, shapes, values, rng);
  });

  cases.emplace_back("tile", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 3), c = pick(rng, 1, 5), h = pick(rng, 1, 4), w = pick(rng, 1, 4);
    return grad_check([h, w](const std::vector<DTensor>& in) { return tile(in[0], h, w); }, {{n, c}},
                      {random_values(rng, n * c)}, rng);
  });

  cases.emplace_back("add", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 3)};
    return grad_check([](const std::vector<DTensor>& in) { return add(in[0], in[1]); }, {xs, xs},
                      {random_values(rng, numel(xs)), random_values(rng, numel(xs))}, rng);
  });

  cases.emplace_back("l1_loss", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 3)};
    std::vector<double> a = random_values(rng, numel(xs)), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.01, 1.0);
    return grad_check([](const std::vector<DTensor>& in) { return l1_loss(in[0], in[1]); }, {xs, xs}, {a, b},
                      rng);
  });

  cases.emplace_back("l2_feature_loss", [](Rng& rng) {
    const Shape xs{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 3)};
    return grad_check([](const std::vector<DTensor>& in) { return l2_feature_loss(in[0], in[1]); }, {xs, xs},
                      {random_values(rng, numel(xs)), random_values(rng, numel(xs))}, rng);
  });

  return cases;
}

/// Full training loss (L1 plus weighted feature distances) on a random image
/// pair, gradient taken w.r.t. the prediction.
inline GradCheckResult loss_case(Rng& rng) {
  static const FeatureExtractor<double> extractor;
  const std::size_t n = pick(rng, 1, 2), h = 4 * pick(rng, 1, 3), w = 4 * pick(rng, 1, 3);
  const Shape xs{n, h, w, 3};
  std::vector<double> pred = random_values(rng, ad::numel(xs), 0.0, 1.0), target(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = rng.uniform(0.01, 0.5);
    target[i] = pred[i] + (pred[i] > 0.5 ? -d : d);
  }
  LossWeights weights;
  weights.beta = rng.uniform(0.5, 2.0);
  return grad_check(
      [&weights, &target, xs](const std::vector<DTensor>& in) {
        return nvr_loss(in[0], DTensor::constant(xs, target), weights, extractor).total;
      },
      {xs}, {pred}, rng);
}

}  // namespace voxelcast::testing
