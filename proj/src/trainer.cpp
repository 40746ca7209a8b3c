#include "voxelcast/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "voxelcast/io.hpp"

namespace voxelcast {

TrainingSample TrainingSample::from_scene(const Scene& scene, Image splat, Image target) {
  const VoxelGrid cam = world_to_camera(assemble_scene(scene).grid, scene.camera);
  const auto& d = cam.dims();
  if (d[0] != d[1] || d[1] != d[2]) throw DimensionError("network input grid must be cubic");
  TrainingSample s;
  s.resolution = d[0];
  const std::vector<float> dense = voxel_tensor(cam);
  for (std::size_t i = 0; i < dense.size() / 4; ++i) {
    if (dense[4 * i + 3] == 0.0f) continue;
    s.occupied.push_back(static_cast<std::uint32_t>(i));
    s.colors.insert(s.colors.end(), dense.begin() + 4 * i, dense.begin() + 4 * i + 3);
  }
  s.light = camera_frame_light(scene.light, scene.camera);
  s.splat = std::move(splat);
  s.target = std::move(target);
  return s;
}

NvrInputs make_inputs(const std::vector<const TrainingSample*>& batch, const NvrConfig& config) {
  if (batch.empty()) throw DimensionError("empty batch");
  const std::size_t r = static_cast<std::size_t>(config.voxel_resolution);
  const std::size_t per = r * r * r * 4;
  std::vector<float> voxels(batch.size() * per, 0.0f), light;
  std::vector<const Image*> splats;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainingSample& s = *batch[b];
    if (s.resolution != config.voxel_resolution)
      throw DimensionError("sample grid is " + std::to_string(s.resolution) + "^3, model expects " +
                           std::to_string(config.voxel_resolution) + "^3");
    for (std::size_t k = 0; k < s.occupied.size(); ++k) {
      float* v = &voxels[b * per + 4 * static_cast<std::size_t>(s.occupied[k])];
      v[0] = s.colors[3 * k];
      v[1] = s.colors[3 * k + 1];
      v[2] = s.colors[3 * k + 2];
      v[3] = 1.0f;
    }
    for (int c = 0; c < 3; ++c) light.push_back(static_cast<float>(s.light[c]));
    splats.push_back(&s.splat);
  }
  NvrInputs in;
  in.voxels = ad::Tensor<float>::constant({batch.size(), r, r, r, 4}, std::move(voxels));
  in.light = ad::Tensor<float>::constant({batch.size(), 3}, std::move(light));
  if (config.plus) in.splat = images_to_tensor(splats);
  return in;
}

namespace {

std::string csv_number(double v) { return std::isnan(v) ? std::string() : io::format_double(v); }

}  // namespace

Color mean_target_color(const std::vector<TrainingSample>& samples) {
  if (samples.empty()) throw TrainingError("no samples");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (const auto& s : samples) {
    const Image& t = s.target;
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) sum += t.rgb(x, y).cast<double>();
    n += t.pixel_count();
  }
  return (sum / static_cast<double>(n)).cast<float>();
}

TrainReport train(NvrModel& model, const std::vector<TrainingSample>& train_set,
                  const std::vector<TrainingSample>& val_set, const TrainOptions& options) {
  if (train_set.empty()) throw TrainingError("training set is empty");
  if (options.batch_size < 1 || options.steps < 0) throw DomainError("batch_size must be >= 1 and steps >= 0");
  options.loss.validate();

  const FeatureExtractor<float> extractor;
  std::vector<const TrainingSample*> val;
  for (const auto& s : val_set) {
    if (options.val_limit && val.size() >= options.val_limit) break;
    val.push_back(&s);
  }

  std::ofstream csv;
  if (!options.log_csv.empty()) {
    csv.open(options.log_csv);
    if (!csv) throw std::runtime_error("cannot write " + options.log_csv.string());
    csv << "step,l1,perceptual,total,val_mse,val_dssim\n";
  }

  TrainReport report;
  std::vector<std::size_t> order(train_set.size());
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;
  for (int step = 1; step <= options.steps; ++step) {
    std::vector<const TrainingSample*> batch;
    while (batch.size() < static_cast<std::size_t>(options.batch_size)) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(options.seed, epoch++));
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)))]);
        cursor = 0;
      }
      batch.push_back(&train_set[order[cursor++]]);
    }

    const NvrInputs in = make_inputs(batch, model.config());
    std::vector<const Image*> targets;
    for (const auto* s : batch) targets.push_back(&s->target);
    const auto prediction = model.forward(in, true);
    const auto terms = nvr_loss(prediction, images_to_tensor(targets), options.loss, extractor);
    const double total = terms.total.item();
    if (!std::isfinite(total))
      throw TrainingError("non-finite loss at step " + std::to_string(step) + " (l1 " + std::to_string(terms.l1) +
                          ", perceptual " + std::to_string(terms.perceptual) + ")");
    terms.total.backward();
    ad::adam_step(model.parameters(), options.adam);

    TrainLogRow row{step, terms.l1, terms.perceptual, total};
    if (options.eval_every > 0 && !val.empty() && (step % options.eval_every == 0 || step == options.steps)) {
      const EvalSummary e = evaluate(model, val);
      row.val_mse = e.mean.mse;
      row.val_dssim = e.mean.dssim;
      if (row.val_mse < report.best_val_mse) {
        report.best_val_mse = row.val_mse;
        report.best_step = step;
        if (!options.best_checkpoint.empty())
          model.save(options.best_checkpoint, "train.step = " + std::to_string(step) + "\n");
      }
    }
    report.rows.push_back(row);
    if (csv) {
      csv << row.step << ',' << csv_number(row.l1) << ',' << csv_number(row.perceptual) << ','
          << csv_number(row.total) << ',' << csv_number(row.val_mse) << ',' << csv_number(row.val_dssim) << '\n';
    }
    if (options.on_log) options.on_log(row);
  }

  const std::size_t n = report.rows.size();
  const std::size_t w = std::min<std::size_t>(TrainReport::kLossWindow, n);
  for (std::size_t i = 0; i < w; ++i) {
    report.initial_loss += report.rows[i].total / static_cast<double>(w);
    report.final_loss += report.rows[n - w + i].total / static_cast<double>(w);
  }
  return report;
}

std::vector<Image> infer(NvrModel& model, const std::vector<const TrainingSample*>& samples, std::size_t batch_size) {
  std::vector<Image> out;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::vector<const TrainingSample*> batch(
        samples.begin() + static_cast<std::ptrdiff_t>(begin),
        samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), begin + batch_size)));
    const auto y = model.forward(make_inputs(batch, model.config()), false);
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(tensor_to_image(y, i));
  }
  return out;
}

Image infer(NvrModel& model, const TrainingSample& sample) { return infer(model, {&sample}).front(); }

EvalSummary summarize(const std::vector<ImageMetrics>& metrics) {
  EvalSummary s;
  s.per_sample = metrics;
  for (const auto& m : metrics) {
    s.mean.mse += m.mse;
    s.mean.dssim += m.dssim;
    s.mean.perceptual += m.perceptual;
  }
  if (!metrics.empty()) {
    const double n = static_cast<double>(metrics.size());
    s.mean = {s.mean.mse / n, s.mean.dssim / n, s.mean.perceptual / n};
  }
  return s;
}

EvalSummary evaluate(NvrModel& model, const std::vector<const TrainingSample*>& samples) {
  const std::vector<Image> predictions = infer(model, samples);
  std::vector<ImageMetrics> m(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) m[i] = eval_metrics(predictions[i], samples[i]->target);
  return summarize(m);
}

EvalSummary evaluate_splats(const std::vector<const TrainingSample*>& samples) {
  std::vector<ImageMetrics> m(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) m[i] = eval_metrics(samples[i]->splat, samples[i]->target);
  return summarize(m);
}

}  // namespace voxelcast
