#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "voxelcast/autodiff/ops.hpp"

namespace voxelcast::testing {

using ad::Shape;
using DTensor = ad::Tensor<double>;

/// Uniform values in [lo, hi], optionally pushed at least `gap` away from 0
/// so kinked ops (relu, abs) are not probed at their kinks.
inline std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0,
                                         double gap = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) {
    do {
      x = rng.uniform(lo, hi);
    } while (std::abs(x) < gap);
  }
  return v;
}

struct GradCheckResult {
  double max_relative_error = 0.0;  // over inputs
  std::size_t checked = 0;
};

/// Reverse-mode gradient of sum(w * f(inputs)) against central differences
/// with step h. The error per input is ||analytic - numeric|| divided by
/// max(||analytic|| + ||numeric||, 1e-10); the result reports the worst input.
/// Inputs larger than `max_probe` elements are probed on a random subset.
inline GradCheckResult grad_check(const std::function<DTensor(const std::vector<DTensor>&)>& f,
                                  const std::vector<Shape>& shapes, const std::vector<std::vector<double>>& values,
                                  Rng& rng, double h = 1e-5, std::size_t max_probe = 400) {
  std::vector<DTensor> leaves;
  for (std::size_t i = 0; i < shapes.size(); ++i) leaves.push_back(DTensor::leaf(shapes[i], values[i]));
  const DTensor out = f(leaves);
  const std::vector<double> weights = random_values(rng, out.size(), 0.5, 1.5);
  auto objective = [&](const std::vector<DTensor>& in) {
    return ad::weighted_sum<double>(f(in), weights).item();
  };
  ad::weighted_sum<double>(out, weights).backward();

  GradCheckResult result;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto g = leaves[i].grad();
    std::vector<std::size_t> probe(values[i].size());
    for (std::size_t k = 0; k < probe.size(); ++k) probe[k] = k;
    if (probe.size() > max_probe) {
      for (std::size_t k = 0; k < max_probe; ++k)
        std::swap(probe[k], probe[k + static_cast<std::size_t>(rng.uniform() * (probe.size() - k))]);
      probe.resize(max_probe);
    }
    double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
    for (std::size_t k : probe) {
      std::vector<DTensor> plus, minus;
      for (std::size_t j = 0; j < leaves.size(); ++j) {
        std::vector<double> vp = values[j], vm = values[j];
        if (j == i) {
          vp[k] += h;
          vm[k] -= h;
        }
        plus.push_back(DTensor::constant(shapes[j], vp));
        minus.push_back(DTensor::constant(shapes[j], vm));
      }
      const double numeric = (objective(plus) - objective(minus)) / (2.0 * h);
      const double analytic = g.empty() ? 0.0 : g[k];
      diff2 += (analytic - numeric) * (analytic - numeric);
      an2 += analytic * analytic;
      nu2 += numeric * numeric;
      ++result.checked;
    }
    const double rel = std::sqrt(diff2) / std::max(std::sqrt(an2) + std::sqrt(nu2), 1e-10);
    result.max_relative_error = std::max(result.max_relative_error, rel);
  }
  return result;
}

}  // namespace voxelcast::testing
