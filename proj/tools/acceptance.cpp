// Acceptance suite: one PASS/FAIL line per criterion. Each check compares the
// library against an independent oracle (brute force, closed form, or a
// scalar-loop reimplementation) or runs the end-to-end experiment.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "cli.hpp"
#include "support/gradient_suite.hpp"
#include "voxelcast/appearance.hpp"
#include "voxelcast/dataset.hpp"
#include "voxelcast/io.hpp"

using namespace voxelcast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o << std::setprecision(precision) << v;
  return o.str();
}

struct Context {
  fs::path work;
  bool reuse = false;
  int desk_steps = 2000;
};

// ---------------------------------------------------------------------------
// 1. Visibility against a segment-vs-box brute force

// True when segment a->b overlaps the open box (lo, hi) over a positive length.
bool segment_crosses_box(const Vec3& a, const Vec3& b, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0, t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double d = b[k] - a[k];
    if (d == 0.0) {
      if (!(a[k] > lo[k] && a[k] < hi[k])) return false;
      continue;
    }
    double ta = (lo[k] - a[k]) / d, tb = (hi[k] - a[k]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0;
}

VoxelGrid random_grid(Rng& rng, int n, double density) {
  GridGeometry g;
  g.dims = {n, n, n};
  g.voxel_size = 2.0 / n;
  g.origin = Vec3(-1.0, -1.0, -1.0);
  VoxelGrid grid(g);
  for (std::size_t i = 0; i < grid.voxel_count(); ++i)
    if (rng.uniform() < density)
      grid.set(i, Color(static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                        static_cast<float>(rng.uniform())));
  return grid;
}

Outcome criterion_visibility(Context&) {
  Rng rng(1001);
  std::size_t mismatches = 0, checked = 0, visible = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const VoxelGrid grid = random_grid(rng, 16, rng.uniform(0.05, 0.35));
    Camera cam;
    cam.elevation_deg = rng.uniform(5.0, 50.0);
    cam.distance = rng.uniform(2.5, 4.0);
    const VisibilityMask mask = compute_visibility(grid, cam);
    const GridGeometry& g = grid.geometry();
    const Vec3 eye(0.0, cam.distance * std::sin(cam.elevation_deg * std::numbers::pi / 180.0),
                   cam.distance * std::cos(cam.elevation_deg * std::numbers::pi / 180.0));
    std::vector<std::size_t> occ;
    for (std::size_t i = 0; i < grid.voxel_count(); ++i)
      if (grid.occupied(i)) occ.push_back(i);
    for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
      bool expected = false;
      if (grid.occupied(i)) {
        const Cell ci = g.cell_at(i);
        const Vec3 center = g.origin + g.voxel_size * Vec3(ci[0] + 0.5, ci[1] + 0.5, ci[2] + 0.5);
        expected = true;
        for (std::size_t j : occ) {
          if (j == i) continue;
          const Cell cj = g.cell_at(j);
          const Vec3 lo = g.origin + g.voxel_size * Vec3(cj[0], cj[1], cj[2]);
          if (segment_crosses_box(eye, center, lo, lo + Vec3::Constant(g.voxel_size))) {
            expected = false;
            break;
          }
        }
      }
      ++checked;
      visible += expected;
      if ((mask.visible[i] != 0) != expected) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over " + std::to_string(checked) +
                               " voxels (" + std::to_string(visible) + " visible), 100 grids"};
}

// ---------------------------------------------------------------------------
// 2. Projection against a look-at matrix pipeline

Outcome criterion_projection(Context&) {
  Rng rng(2002);
  double worst = 0.0;
  bool origin_exact = true;
  for (int i = 0; i < 1000; ++i) {
    Camera cam;
    cam.elevation_deg = rng.uniform(0.0, 89.0);
    cam.distance = rng.uniform(2.0, 6.0);
    cam.focal_length = rng.uniform(20.0, 80.0);
    cam.sensor_width = rng.uniform(24.0, 40.0);
    cam.width = rng.uniform_int(16, 128);
    cam.height = rng.uniform_int(16, 128);

    const double e = cam.elevation_deg * std::numbers::pi / 180.0;
    const Eigen::Vector3d eye(0.0, cam.distance * std::sin(e), cam.distance * std::cos(e));
    const Eigen::Vector3d fwd = (-eye).normalized();
    const Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitY()).normalized();
    const Eigen::Vector3d up = right.cross(fwd);
    Eigen::Matrix4d view = Eigen::Matrix4d::Identity();
    view.block<1, 3>(0, 0) = right.transpose();
    view.block<1, 3>(1, 0) = up.transpose();
    view.block<1, 3>(2, 0) = fwd.transpose();
    view.block<3, 1>(0, 3) = -view.block<3, 3>(0, 0) * eye;
    const double fp = cam.focal_length / cam.sensor_width * cam.width;
    Eigen::Matrix<double, 3, 4> k = Eigen::Matrix<double, 3, 4>::Zero();
    k << fp, 0.0, 0.5 * cam.width, 0.0,  //
        0.0, -fp, 0.5 * cam.height, 0.0,  //
        0.0, 0.0, 1.0, 0.0;
    const Eigen::Matrix<double, 3, 4> p = k * view;

    const Eigen::Vector4d x(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 1.0);
    const Eigen::Vector3d h = p * x;
    const double ref[3] = {h[0] / h[2], h[1] / h[2], (view * x)[2]};
    const auto got = project_point(cam, x.head<3>());
    if (!got) return {false, "point in front of the camera was rejected"};
    const double val[3] = {got->u, got->v, got->depth};
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(val[c] - ref[c]) / std::max(std::abs(ref[c]), 1.0));

    const auto o = project_point(cam, Vec3::Zero());
    if (!o || o->u != 0.5 * cam.width || o->v != 0.5 * cam.height) origin_exact = false;
  }
  return {worst < 1e-9 && origin_exact,
          "max relative error " + fmt(worst) + " over 1000 points; origin at image center " +
              (origin_exact ? "exactly" : "NOT exactly")};
}

// ---------------------------------------------------------------------------
// 3. Splat z-buffer against a per-pixel minimum over all covering splats

Outcome criterion_splat(Context&) {
  Rng rng(3003);
  std::size_t depth_errors = 0, coverage_errors = 0, color_errors = 0, covered = 0, perm_diffs = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const VoxelGrid grid = random_grid(rng, 16, rng.uniform(0.03, 0.3));
    Camera cam;
    cam.elevation_deg = rng.uniform(5.0, 50.0);
    cam.distance = rng.uniform(2.5, 4.0);
    const SplatCanvas canvas = splat(grid, cam);
    const GridGeometry& g = grid.geometry();

    struct Disc {
      double u, v, depth;
      int r;
      std::size_t index;
    };
    std::vector<Disc> discs;
    for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
      if (!grid.occupied(i)) continue;
      const auto p = project_point(cam, g.center(g.cell_at(i)));
      if (!p) continue;
      const double pixels = g.voxel_size * cam.focal_length / cam.sensor_width * cam.width / p->depth;
      discs.push_back({p->u, p->v, p->depth, std::max(1, static_cast<int>(std::ceil(0.5 * pixels))), i});
    }
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_index = 0;
        for (const Disc& d : discs) {
          const double dx = x + 0.5 - d.u, dy = y + 0.5 - d.v;
          if (dx * dx + dy * dy > static_cast<double>(d.r) * d.r) continue;
          if (d.depth < best || (d.depth == best && d.index < best_index)) {
            best = d.depth;
            best_index = d.index;
          }
        }
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        const bool hit = std::isfinite(best);
        if (hit != (canvas.coverage[p] != 0)) ++coverage_errors;
        if (!hit) continue;
        ++covered;
        if (canvas.depth[p] != best) ++depth_errors;
        if (canvas.color.rgb(x, y) != grid.color(best_index)) ++color_errors;
      }

    std::vector<std::size_t> order(grid.voxel_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int perm = 0; perm < 3; ++perm) {
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform() * i)]);
      const SplatCanvas other = splat_in_order(grid, cam, order);
      const auto a = canvas.color.data(), b = other.color.data();
      const bool same = std::memcmp(a.data(), b.data(), a.size_bytes()) == 0 &&
                        std::memcmp(canvas.depth.data(), other.depth.data(), canvas.depth.size() * sizeof(double)) == 0 &&
                        canvas.coverage == other.coverage && canvas.source == other.source;
      if (!same) ++perm_diffs;
    }
  }
  const bool ok = depth_errors == 0 && coverage_errors == 0 && color_errors == 0 && perm_diffs == 0;
  return {ok, std::to_string(covered) + " covered pixels: " + std::to_string(depth_errors) + " depth, " +
                  std::to_string(coverage_errors) + " coverage, " + std::to_string(color_errors) +
                  " color mismatches; " + std::to_string(perm_diffs) + "/60 permutations differ"};
}

// ---------------------------------------------------------------------------
// 4. Finite-difference gradient suite

Outcome criterion_gradients(Context&) {
  Rng rng(4004);
  constexpr int kShapes = 20;
  double worst = 0.0;
  std::string worst_op;
  int failures = 0, ops = 0;
  auto record = [&](const std::string& name, double err) {
    if (err >= 1e-4) ++failures;
    if (err > worst) {
      worst = err;
      worst_op = name;
    }
  };
  for (const auto& [name, run] : testing::op_cases()) {
    ++ops;
    for (int i = 0; i < kShapes; ++i) record(name, run(rng).max_relative_error);
  }
  ++ops;
  for (int i = 0; i < kShapes; ++i) record("training loss", testing::loss_case(rng).max_relative_error);
  return {failures == 0, std::to_string(ops) + " ops x " + std::to_string(kShapes) + " shapes, " +
                             std::to_string(failures) + " failures, worst " + fmt(worst) + " (" + worst_op + ")"};
}

// ---------------------------------------------------------------------------
// 5. Lighting physics

// Configuration factor from a point to a parallel rectangle [0,a]x[0,b]
// whose corner lies straight above it at height h.
double corner_factor(double a, double b, double h) {
  const double x = a / h, y = b / h;
  const double sx = std::sqrt(1.0 + x * x), sy = std::sqrt(1.0 + y * y);
  return (x / sx * std::atan(y / sx) + y / sy * std::atan(x / sy)) / (2.0 * std::numbers::pi);
}

double signed_corner(double a, double b, double h) {
  const double s = (a < 0.0 ? -1.0 : 1.0) * (b < 0.0 ? -1.0 : 1.0);
  return s * corner_factor(std::abs(a), std::abs(b), h);
}

// Analytic irradiance from a horizontal rectangle light at floor point p.
double analytic_irradiance(const AreaLight& light, const Vec3& p) {
  const double h = light.center.y() - p.y();
  const double x0 = light.center.x() - light.half_x - p.x(), x1 = light.center.x() + light.half_x - p.x();
  const double z0 = light.center.z() - light.half_z - p.z(), z1 = light.center.z() + light.half_z - p.z();
  const double f = signed_corner(x1, z1, h) - signed_corner(x0, z1, h) - signed_corner(x1, z0, h) +
                   signed_corner(x0, z0, h);
  return light.intensity * f;
}

VoxelGrid scene_grid() {
  SceneLayout layout;
  return VoxelGrid(layout.geometry());
}

// Fraction of unoccluded light blocked at floor point p.
double shadow_amount(const VoxelGrid& grid, const AreaLight& light, const Vec3& p, int samples, std::uint64_t seed) {
  Rng a(seed), b(seed);
  const Vec3 n(0.0, 1.0, 0.0);
  const double open = direct_light(grid, p, n, light, samples, a, false);
  return open > 0.0 ? 1.0 - direct_light(grid, p, n, light, samples, b, true) / open : 0.0;
}

Outcome criterion_lighting(Context&) {
  Rng rng(5005);
  const double floor_y = SceneLayout{}.ground_height(2);

  // (a) unoccluded irradiance
  const VoxelGrid empty = scene_grid();
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    AreaLight light;
    light.center = Vec3(rng.uniform(-1.5, 1.5), rng.uniform(2.5, 3.0), rng.uniform(-1.5, 1.5));
    light.half_x = rng.uniform(0.2, 0.8);
    light.half_z = rng.uniform(0.2, 0.8);
    const Vec3 p(rng.uniform(-1.0, 1.0), floor_y, rng.uniform(-1.0, 1.0));
    Rng srng(static_cast<std::uint64_t>(i));
    const double est = direct_light(empty, p, Vec3(0.0, 1.0, 0.0), light, 64, srng);
    const double ref = analytic_irradiance(light, p);
    worst = std::max(worst, std::abs(est - ref) / ref);
  }
  const bool irradiance_ok = worst < 0.02;

  // (b) shadow centroid moves against the light
  int opposite = 0;
  for (int trial = 0; trial < 10; ++trial) {
    VoxelGrid grid = scene_grid();
    const GridGeometry& g = grid.geometry();
    const int cx = rng.uniform_int(12, 19), cz = rng.uniform_int(12, 19), height = rng.uniform_int(4, 8);
    for (int x = cx; x < cx + 2; ++x)
      for (int z = cz; z < cz + 2; ++z)
        for (int y = 2; y < 2 + height; ++y) grid.set(Cell{x, y, z}, Color(1, 1, 1));
    AreaLight l0;
    l0.center = Vec3(rng.uniform(-0.8, 0.8), rng.uniform(2.5, 3.0), rng.uniform(-0.8, 0.8));
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec3 shift = rng.uniform(0.3, 0.7) * Vec3(std::cos(angle), 0.0, std::sin(angle));
    AreaLight l1 = l0;
    l1.center += shift;
    auto centroid = [&](const AreaLight& light) {
      Vec3 sum = Vec3::Zero();
      double mass = 0.0;
      for (int i = 0; i < 64; ++i)
        for (int k = 0; k < 64; ++k) {
          const Vec3 p(-1.0 + (i + 0.5) / 32.0, floor_y, -1.0 + (k + 0.5) / 32.0);
          const Cell c = g.cell_of(p + Vec3(0.0, 0.5 * g.voxel_size, 0.0));
          if (grid.occupied(c)) continue;  // under the occluder
          const double s = shadow_amount(grid, light, p, 64, static_cast<std::uint64_t>(i * 64 + k));
          sum += s * p;
          mass += s;
        }
      return Vec3(sum / mass);
    };
    if ((centroid(l1) - centroid(l0)).dot(shift) < 0.0) ++opposite;
  }
  const bool centroid_ok = opposite == 10;

  // (c) penumbra widens with the light
  VoxelGrid wall = scene_grid();
  for (int z = 0; z < 32; ++z)
    for (int y = 2; y < 12; ++y) wall.set(Cell{14, y, z}, Color(1, 1, 1));
  const double wall_face = wall.geometry().plane(0, 15);
  std::vector<double> widths;
  for (double half : {0.2, 0.4, 0.7}) {
    AreaLight light;
    light.center = Vec3(-0.6, 2.75, 0.0);
    light.half_x = light.half_z = half;
    double x10 = std::numeric_limits<double>::quiet_NaN(), x90 = x10;
    for (double x = wall_face + 1e-3; x < 1.0; x += 0.002) {
      const double s = shadow_amount(wall, light, Vec3(x, floor_y, 0.0), 4096, 7);
      if (std::isnan(x90) && s < 0.9) x90 = x;
      if (std::isnan(x10) && s < 0.1) x10 = x;
    }
    widths.push_back(x10 - x90);
  }
  const bool penumbra_ok = widths[0] < widths[1] && widths[1] < widths[2];

  return {irradiance_ok && centroid_ok && penumbra_ok,
          "irradiance max rel error " + fmt(worst) + "; centroid opposite " + std::to_string(opposite) +
              "/10; penumbra widths " + fmt(widths[0], 3) + " < " + fmt(widths[1], 3) + " < " + fmt(widths[2], 3)};
}

// ---------------------------------------------------------------------------
// 6. Single-scene overfit

Outcome criterion_overfit(Context& ctx) {
  DatasetOptions opt;
  opt.objects = 1;
  opt.seed = 6006;
  opt.spec = SamplingSpec::train_defaults(6006);
  opt.spec.views_per_object = 1;
  const fs::path dir = ctx.work / "overfit";
  const DatasetManifest manifest = generate_dataset(opt, dir);
  const std::vector<TrainingSample> samples = load_samples(manifest, dir);

  NvrModel model(NvrConfig{}, 6);
  model.set_output_bias(mean_target_color(samples));
  TrainOptions to;
  to.steps = 500;
  to.batch_size = 1;
  to.adam.lr = 1e-4;
  to.eval_every = 0;
  to.seed = 6;
  const TrainReport report = train(model, samples, {}, to);
  const double mse = mse_255(infer(model, samples[0]), samples[0].target) / (255.0 * 255.0);
  return {mse < 1e-3, "MSE " + fmt(mse) + " after 500 steps (loss " + fmt(report.initial_loss) + " -> " +
                          fmt(report.final_loss) + ")"};
}

// ---------------------------------------------------------------------------
// 7 and 8. Desk-scale dataset

struct DeskResult {
  double plus_initial = 0.0, plus_final = 0.0, nvr_initial = 0.0, nvr_final = 0.0;
  double mse_plus = 0.0, mse_nvr = 0.0, mse_splat = 0.0;
  double mse_plus_34 = 0.0, mse_plus_12 = 0.0;
  std::size_t train_samples = 0, test_samples = 0;
};

std::optional<DeskResult> desk_cache;

DeskResult run_desk(Context& ctx) {
  if (desk_cache) return *desk_cache;
  const fs::path dir = ctx.work / "desk";
  const fs::path summary_path = dir / "summary.txt";
  DeskResult r;

  DatasetOptions opt;
  opt.seed = 7007;
  opt.setting = AppearanceSetting::default_parts;
  const fs::path train_manifest = dir / manifest_filename(Split::train);
  const fs::path test_manifest = dir / manifest_filename(Split::test);
  if (!(ctx.reuse && fs::exists(train_manifest) && fs::exists(test_manifest))) {
    opt.objects = 200;
    opt.spec = SamplingSpec::train_defaults(derive_seed(opt.seed, 1));
    generate_dataset(opt, dir, [](const std::string& s) { std::cerr << s << "\n"; });
    opt.objects = 20;
    opt.spec = SamplingSpec::test_defaults(derive_seed(opt.seed, 2));
    generate_dataset(opt, dir, [](const std::string& s) { std::cerr << s << "\n"; });
  }
  const auto train_set = load_samples(DatasetManifest::load(train_manifest), dir);
  const auto test_m = DatasetManifest::load(test_manifest);
  const auto test_set = load_samples(test_m, dir);
  r.train_samples = train_set.size();
  r.test_samples = test_set.size();
  std::vector<const TrainingSample*> test_ptrs;
  for (const auto& s : test_set) test_ptrs.push_back(&s);

  KeyValueDocument summary;
  if (ctx.reuse && fs::exists(summary_path)) summary = KeyValueDocument::load(summary_path);

  auto trained = [&](bool plus, double& initial, double& final_loss) {
    const std::string tag = plus ? "nvr_plus" : "nvr";
    const fs::path ckpt = dir / (tag + ".ckpt");
    if (ctx.reuse && fs::exists(ckpt) && summary.has(tag + ".initial")) {
      initial = summary.get_double(tag + ".initial");
      final_loss = summary.get_double(tag + ".final");
      return NvrModel::load(ckpt);
    }
    NvrConfig config;
    config.plus = plus;
    NvrModel model(config, 77);
    model.set_output_bias(mean_target_color(train_set));
    TrainOptions to;
    to.steps = ctx.desk_steps;
    to.batch_size = 10;
    to.seed = 77;
    to.eval_every = 0;
    to.log_csv = dir / (tag + "_train.csv");
    to.on_log = [&tag](const TrainLogRow& row) {
      if (row.step % 250 == 0) std::cerr << "  " << tag << " step " << row.step << " loss " << row.total << "\n";
    };
    const TrainReport rep = train(model, train_set, {}, to);
    initial = rep.initial_loss;
    final_loss = rep.final_loss;
    model.save(ckpt);
    summary.set(tag + ".initial", initial);
    summary.set(tag + ".final", final_loss);
    summary.save(summary_path);
    return model;
  };

  NvrModel plus = trained(true, r.plus_initial, r.plus_final);
  r.mse_plus = evaluate(plus, test_ptrs).mean.mse;
  r.mse_splat = evaluate_splats(test_ptrs).mean.mse;
  for (double factor : {0.75, 0.5}) {
    const auto degraded = load_samples(test_m, dir, factor);
    std::vector<const TrainingSample*> ptrs;
    for (const auto& s : degraded) ptrs.push_back(&s);
    (factor == 0.75 ? r.mse_plus_34 : r.mse_plus_12) = evaluate(plus, ptrs).mean.mse;
  }
  NvrModel nvr = trained(false, r.nvr_initial, r.nvr_final);
  r.mse_nvr = evaluate(nvr, test_ptrs).mean.mse;
  desk_cache = r;
  return r;
}

Outcome criterion_desk(Context& ctx) {
  const DeskResult r = run_desk(ctx);
  const bool a = r.plus_final < 0.5 * r.plus_initial;
  const bool b = r.mse_plus < r.mse_splat;
  const bool c = r.mse_plus <= r.mse_nvr;
  std::string d = std::to_string(r.train_samples) + " train / " + std::to_string(r.test_samples) + " test samples; ";
  d += "(a) NVR+ loss " + fmt(r.plus_initial) + " -> " + fmt(r.plus_final) + (a ? " ok" : " FAIL");
  d += " [NVR " + fmt(r.nvr_initial) + " -> " + fmt(r.nvr_final) + "]";
  d += "; (b) MSE NVR+ " + fmt(r.mse_plus) + " vs splat " + fmt(r.mse_splat) + (b ? " ok" : " FAIL");
  d += "; (c) vs NVR " + fmt(r.mse_nvr) + (c ? " ok" : " FAIL");
  return {a && b && c, d};
}

Outcome criterion_degradation(Context& ctx) {
  const DeskResult r = run_desk(ctx);
  const bool ok = r.mse_plus <= r.mse_plus_34 && r.mse_plus_34 <= r.mse_plus_12;
  return {ok, "NVR+ MSE full " + fmt(r.mse_plus) + ", 3/4 " + fmt(r.mse_plus_34) + ", 1/2 " + fmt(r.mse_plus_12)};
}

// ---------------------------------------------------------------------------
// 9. Metrics against scalar-loop references

double ref_mse(const Image& a, const Image& b) {
  double s = 0.0;
  int n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const double d = 255.0 * a.at(x, y, c) - 255.0 * b.at(x, y, c);
        s += d * d;
        ++n;
      }
  return s / n;
}

double ref_ssim(const Image& a, const Image& b) {
  double w[11][11], total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      total += w[i][j];
    }
  const double c1 = 1e-4, c2 = 9e-4;
  double channel_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    int windows = 0;
    for (int y0 = 0; y0 + 11 <= a.height(); ++y0)
      for (int x0 = 0; x0 + 11 <= a.width(); ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double k = w[i][j] / total;
            const double va = a.at(x0 + j, y0 + i, c), vb = b.at(x0 + j, y0 + i, c);
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
    channel_sum += sum / windows;
  }
  return channel_sum / 3.0;
}

// conv 3x3 (zero padding) + bias + relu + 2x2 average, on an (h, w, c) array.
std::vector<double> ref_stage(const std::vector<double>& in, int h, int w, int cin, const ad::Tensor<double>& k,
                              const ad::Tensor<double>& bias, int cout) {
  std::vector<double> act(static_cast<std::size_t>(h) * w * cout);
  const auto kv = k.values();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int o = 0; o < cout; ++o) {
        double s = bias.values()[o];
        for (int dy = 0; dy < 3; ++dy)
          for (int dx = 0; dx < 3; ++dx) {
            const int yy = y + dy - 1, xx = x + dx - 1;
            if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
            for (int i = 0; i < cin; ++i)
              s += kv[((dy * 3 + dx) * cin + i) * cout + o] * in[(static_cast<std::size_t>(yy) * w + xx) * cin + i];
          }
        act[(static_cast<std::size_t>(y) * w + x) * cout + o] = std::max(0.0, s);
      }
  std::vector<double> out(static_cast<std::size_t>(h / 2) * (w / 2) * cout, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int o = 0; o < cout; ++o)
        out[(static_cast<std::size_t>(y / 2) * (w / 2) + x / 2) * cout + o] +=
            0.25 * act[(static_cast<std::size_t>(y) * w + x) * cout + o];
  return out;
}

double ref_perceptual(const Image& a, const Image& b) {
  static const FeatureExtractor<double> fe;
  const auto wts = fe.weights();
  auto features = [&](const Image& im) {
    std::vector<double> px(im.data().begin(), im.data().end());
    auto f1 = ref_stage(px, im.height(), im.width(), 3, wts[0], wts[1], 16);
    auto f2 = ref_stage(f1, im.height() / 2, im.width() / 2, 16, wts[2], wts[3], 32);
    return std::make_pair(f1, f2);
  };
  auto rms = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s / x.size());
  };
  const auto fa = features(a), fb = features(b);
  return 1.0 * rms(fa.first, fb.first) + 0.1 * rms(fa.second, fb.second);
}

Outcome criterion_metrics(Context&) {
  Rng rng(9009);
  double worst = 0.0;
  auto close = [&](double got, double ref) {
    const double e = std::abs(got - ref) / std::max(1.0, std::abs(ref));
    worst = std::max(worst, e);
  };
  for (int i = 0; i < 50; ++i) {
    const int w = 4 * rng.uniform_int(3, 10), h = 4 * rng.uniform_int(3, 10);
    Image a(w, h, 3), b(w, h, 3);
    if (i == 0) {  // checkerboard vs its inverse
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int c = 0; c < 3; ++c) {
            a.at(x, y, c) = static_cast<float>((x + y) % 2);
            b.at(x, y, c) = 1.0f - a.at(x, y, c);
          }
    } else {
      for (auto& v : a.data()) v = static_cast<float>(rng.uniform());
      for (std::size_t k = 0; k < b.data().size(); ++k)
        b.data()[k] = static_cast<float>(std::clamp(a.data()[k] + rng.uniform(-0.5, 0.5) * (i % 3), 0.0, 1.0));
    }
    const ImageMetrics m = eval_metrics(a, b);
    close(m.mse, ref_mse(a, b));
    close(m.dssim, (1.0 - ref_ssim(a, b)) / 2.0);
    close(m.perceptual, ref_perceptual(a, b));
  }
  Image same(32, 32, 3);
  for (auto& v : same.data()) v = static_cast<float>(rng.uniform());
  const ImageMetrics z = eval_metrics(same, same);
  const bool zeros = z.mse == 0.0 && z.dssim == 0.0 && z.perceptual == 0.0;
  return {worst < 1e-9 && zeros, "max deviation " + fmt(worst) + " over 50 pairs; identical images give (" +
                                     fmt(z.mse) + ", " + fmt(z.dssim) + ", " + fmt(z.perceptual) + ")"};
}

// ---------------------------------------------------------------------------
// 10. gen-dataset determinism

std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return out;
}

Outcome criterion_determinism(Context& ctx) {
  std::vector<std::map<std::string, std::vector<std::uint8_t>>> runs;
  for (const char* name : {"gen_a", "gen_b"}) {
    const fs::path dir = ctx.work / name;
    fs::remove_all(dir);
    const std::string out = dir.string();
    const char* argv[] = {"voxelcast", "--seed", "1234", "--out", out.c_str(), "gen-dataset", "--objects", "6",
                          "--test-objects", "2", "--views", "3"};
    std::ostringstream sink_out, sink_err;
    const int code = run_cli(static_cast<int>(std::size(argv)), argv, sink_out, sink_err);
    if (code != 0) return {false, "gen-dataset exited with " + std::to_string(code) + ": " + sink_err.str()};
    runs.push_back(tree_bytes(dir));
  }
  std::size_t differing = 0;
  std::set<std::string> names;
  for (const auto& r : runs)
    for (const auto& [k, v] : r) names.insert(k);
  for (const auto& n : names) {
    const auto a = runs[0].find(n), b = runs[1].find(n);
    if (a == runs[0].end() || b == runs[1].end() || a->second != b->second) ++differing;
  }
  const bool manifests = runs[0].count("manifest_train.txt") && runs[0].count("manifest_test.txt");
  return {differing == 0 && manifests && names.size() > 2,
          std::to_string(names.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string work;
  Context ctx;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 10));
  app.add_option("--work", work, "Scratch directory for generated data");
  app.add_flag("--reuse", ctx.reuse, "Reuse generated datasets and trained checkpoints in the work directory");
  app.add_option("--desk-steps", ctx.desk_steps, "Training steps for the desk-scale run")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  ctx.work = work.empty() ? fs::temp_directory_path() / "voxelcast_acceptance" : fs::path(work);
  fs::create_directories(ctx.work);

  const std::vector<std::pair<std::string, Outcome (*)(Context&)>> criteria = {
      {"geometric oracle equivalence", criterion_visibility},
      {"projection correctness", criterion_projection},
      {"splat depth correctness", criterion_splat},
      {"gradient suite", criterion_gradients},
      {"oracle lighting physics", criterion_lighting},
      {"single-sample overfit", criterion_overfit},
      {"desk dataset training", criterion_desk},
      {"resolution degradation trend", criterion_degradation},
      {"metrics correctness", criterion_metrics},
      {"pipeline determinism", criterion_determinism},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt(secs, 3) << " s)" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
