#include <doctest.h>

#include <cmath>

#include "support/fixtures.hpp"
#include "voxelcast/nvr.hpp"

using namespace voxelcast;
using voxelcast::testing::quick_sample;

namespace {

const std::vector<TrainingSample>& samples() {
  static const std::vector<TrainingSample> s = {quick_sample(31), quick_sample(32), quick_sample(33)};
  return s;
}

std::vector<std::vector<float>> snapshot(const NvrModel& m) {
  std::vector<std::vector<float>> out;
  for (const auto& e : m.parameters().entries()) out.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

TrainOptions quick_options(int steps) {
  TrainOptions o;
  o.steps = steps;
  o.batch_size = 2;
  o.eval_every = 0;
  o.seed = 5;
  return o;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("zero learning rate leaves parameters unchanged") {
  NvrModel model(NvrConfig{}, 1);
  const auto before = snapshot(model);
  TrainOptions o = quick_options(3);
  o.adam.lr = 0.0;
  train(model, samples(), {}, o);
  CHECK(snapshot(model) == before);
}

TEST_CASE("a fixed seed reproduces the loss curve") {
  std::vector<double> curves[2];
  for (auto& curve : curves) {
    NvrModel model(NvrConfig{}, 2);
    const TrainReport r = train(model, samples(), {}, quick_options(4));
    for (const auto& row : r.rows) curve.push_back(row.total);
  }
  REQUIRE(curves[0].size() == 4);
  CHECK(curves[0] == curves[1]);
}

TEST_CASE("training lowers the loss on a single sample") {
  NvrModel model(NvrConfig{}, 3);
  model.set_output_bias(mean_target_color(samples()));
  TrainOptions o = quick_options(30);
  o.batch_size = 1;
  const std::vector<TrainingSample> one = {samples()[0]};
  const TrainReport r = train(model, one, {}, o);
  CHECK(r.final_loss < r.initial_loss);
}

TEST_CASE("a non-finite loss aborts training") {
  std::vector<TrainingSample> bad = {samples()[0]};
  bad[0].target.data()[0] = std::numeric_limits<float>::quiet_NaN();
  NvrModel model(NvrConfig{}, 4);
  CHECK_THROWS_AS(train(model, bad, {}, quick_options(2)), TrainingError);
}

TEST_CASE("an empty dataset is rejected") {
  NvrModel model(NvrConfig{}, 5);
  CHECK_THROWS_AS(train(model, {}, {}, quick_options(1)), TrainingError);
}

TEST_CASE("validation runs on schedule and keeps the best score") {
  NvrModel model(NvrConfig{}, 6);
  TrainOptions o = quick_options(4);
  o.eval_every = 2;
  const TrainReport r = train(model, samples(), samples(), o);
  int evaluated = 0;
  for (const auto& row : r.rows) evaluated += !std::isnan(row.val_mse);
  CHECK(evaluated == 2);
  CHECK(std::isfinite(r.best_val_mse));
  CHECK((r.best_step == 2 || r.best_step == 4));
}

TEST_CASE("mean target color") {
  TrainingSample a = samples()[0], b = samples()[1];
  a.target = Image(64, 64, 3, 0.2f);
  b.target = Image(64, 64, 3, 0.6f);
  const Color m = mean_target_color({a, b});
  CHECK(m.x() == doctest::Approx(0.4));
  CHECK(m.z() == doctest::Approx(0.4));
}

TEST_CASE("splat evaluation compares splats with targets") {
  std::vector<const TrainingSample*> ptrs;
  for (const auto& s : samples()) ptrs.push_back(&s);
  const EvalSummary e = evaluate_splats(ptrs);
  REQUIRE(e.per_sample.size() == 3);
  CHECK(e.per_sample[0].mse == doctest::Approx(mse_255(samples()[0].splat, samples()[0].target)));
  CHECK(e.mean.mse > 0.0);
}

}  // TEST_SUITE
