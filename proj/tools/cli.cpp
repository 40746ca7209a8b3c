#include "cli.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <optional>

#include "voxelcast/appearance.hpp"
#include "voxelcast/dataset.hpp"
#include "voxelcast/io.hpp"

namespace voxelcast {

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out = ".";
  KeyValueDocument doc;

  std::filesystem::path output(const std::string& name) const { return std::filesystem::path(out) / name; }
};

// A flag given on the command line wins over the config file, which wins
// over the built-in default.
template <class T>
T pick(const CLI::Option* opt, const T& value, const KeyValueDocument& doc, const std::string& key) {
  if (opt->count() > 0 || !doc.has(key)) return value;
  if constexpr (std::is_same_v<T, int>) {
    return doc.get_int(key);
  } else if constexpr (std::is_same_v<T, double>) {
    return doc.get_double(key);
  } else {
    return doc.get(key);
  }
}

void print_metrics(std::ostream& out, const std::string& label, const ImageMetrics& m) {
  out << std::setprecision(6) << label << "mse " << m.mse << "\n"
      << label << "dssim " << m.dssim << "\n"
      << label << "perceptual " << m.perceptual << "\n";
}

Vec3 to_vec3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

// Path written into a scene file so it resolves from the scene's directory.
std::string relative_to(const std::filesystem::path& target, const std::filesystem::path& scene_file) {
  const auto base = std::filesystem::absolute(scene_file).parent_path();
  return std::filesystem::absolute(target).lexically_normal().lexically_relative(base).generic_string();
}

Image network_prediction(const std::filesystem::path& checkpoint, const Scene& scene) {
  NvrModel model = NvrModel::load(checkpoint);
  const Image splat = splat_scene(scene).color.quantized();
  Image blank(scene.camera.width, scene.camera.height, 3);
  return infer(model, TrainingSample::from_scene(scene, splat, blank));
}

// ---- gen-dataset ----

struct GenArgs {
  int objects = 200;
  int test_objects = 20;
  int views = 5;
  std::string setting = "default_parts";
  std::string split = "both";
  int shadow_samples = 16;
  CLI::Option *o_objects, *o_test, *o_views, *o_setting, *o_shadow;
};

int cmd_gen_dataset(const Globals& g, const GenArgs& a, std::ostream& out, std::ostream& err) {
  const auto& d = g.doc;
  DatasetOptions opt;
  opt.seed = g.seed;
  opt.setting = parse_appearance_setting(pick(a.o_setting, a.setting, d, "dataset.setting"));
  opt.render.shadow_samples = pick(a.o_shadow, a.shadow_samples, d, "render.shadow_samples");
  const std::filesystem::path dir(g.out);
  auto log = [&err](const std::string& line) { err << line << "\n"; };

  if (a.split == "train" || a.split == "both") {
    SamplingSpec train = SamplingSpec::read(d, "sampling.train.", SamplingSpec::train_defaults(derive_seed(g.seed, 1)));
    train.views_per_object = pick(a.o_views, a.views, d, "dataset.views");
    opt.spec = train;
    opt.objects = pick(a.o_objects, a.objects, d, "dataset.objects");
    const auto m = generate_dataset(opt, dir, log);
    out << "train: " << m.records.size() << " records -> " << (dir / manifest_filename(Split::train)).string() << "\n";
  }
  if (a.split == "test" || a.split == "both") {
    opt.spec = SamplingSpec::read(d, "sampling.test.", SamplingSpec::test_defaults(derive_seed(g.seed, 2)));
    opt.objects = pick(a.o_test, a.test_objects, d, "dataset.test_objects");
    const auto m = generate_dataset(opt, dir, log);
    out << "test: " << m.records.size() << " records -> " << (dir / manifest_filename(Split::test)).string() << "\n";
  }
  return 0;
}

// ---- single-scene commands ----

struct SceneArgs {
  std::string scene;
  std::string image;
  std::string output;
  std::string depth;
  std::string visibility;
  int shadow_samples = 16;
  bool no_indirect = false;
  double radius_scale = 1.0;
};

int cmd_capture(const Globals& g, const SceneArgs& a, std::ostream& out) {
  const Scene scene = load_scene(a.scene);
  std::filesystem::path image = a.image;
  if (image.empty()) {
    const auto desc = load_scene_description(a.scene);
    if (desc.appearance_path.empty()) throw DomainError("scene has no appearance image; pass --image");
    image = std::filesystem::path(a.scene).parent_path() / desc.appearance_path;
  }
  const CaptureResult cap = capture_object_appearance(scene, AppearanceSource{load_image(image), scene.camera});
  const auto path = g.output(a.output);
  ensure_parent(path);
  write_grid(path, cap.grid);
  out << "captured " << cap.mask.visible_count() << " visible voxels -> " << path.string() << "\n";
  if (!a.visibility.empty()) {
    const auto vpath = g.output(a.visibility);
    write_visibility_mask(vpath, cap.mask);
    out << "visibility -> " << vpath.string() << "\n";
  }
  return 0;
}

int cmd_splat(const Globals& g, const SceneArgs& a, std::ostream& out) {
  SplatOptions so;
  so.radius_scale = a.radius_scale;
  const SplatCanvas canvas = splat_scene(load_scene(a.scene), so);
  const auto path = g.output(a.output);
  ensure_parent(path);
  if (a.depth.empty()) {
    write_png(path, canvas.color);
  } else {
    write_splat(path, g.output(a.depth), canvas);
  }
  out << "splat covers " << canvas.covered_count() << " pixels -> " << path.string() << "\n";
  return 0;
}

int cmd_oracle(const Globals& g, const SceneArgs& a, std::ostream& out) {
  RenderSettings rs;
  rs.shadow_samples = a.shadow_samples;
  rs.indirect_bounce = !a.no_indirect;
  rs.rng_seed = g.seed;
  const auto path = g.output(a.output);
  ensure_parent(path);
  write_png(path, render_scene(load_scene(a.scene), rs));
  out << "rendered -> " << path.string() << "\n";
  return 0;
}

// ---- train / infer / eval ----

struct TrainArgs {
  std::string manifest;
  std::string val;
  std::string variant = "nvr+";
  int steps = 2000;
  int batch = 10;
  double lr = 1e-4;
  double beta = 1.0;
  int eval_every = 250;
  std::string output = "model.ckpt";
  std::string log = "train.csv";
  CLI::Option *o_steps, *o_batch, *o_lr, *o_beta, *o_variant;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  const auto& d = g.doc;
  NvrConfig config = NvrConfig::read(d);
  const std::string variant = pick(a.o_variant, a.variant, d, "train.variant");
  if (variant != "nvr+" && variant != "nvr") throw DomainError("variant must be nvr or nvr+");
  config.plus = variant == "nvr+";

  const auto manifest = DatasetManifest::load(a.manifest);
  const auto train_set = load_samples(manifest, std::filesystem::path(a.manifest).parent_path());
  std::vector<TrainingSample> val_set;
  if (!a.val.empty()) val_set = load_samples(DatasetManifest::load(a.val), std::filesystem::path(a.val).parent_path());

  TrainOptions opt;
  opt.steps = pick(a.o_steps, a.steps, d, "train.steps");
  opt.batch_size = pick(a.o_batch, a.batch, d, "train.batch_size");
  opt.adam.lr = pick(a.o_lr, a.lr, d, "train.lr");
  opt.loss.beta = pick(a.o_beta, a.beta, d, "train.beta");
  opt.seed = g.seed;
  opt.eval_every = val_set.empty() ? 0 : a.eval_every;
  std::filesystem::create_directories(g.out);
  opt.log_csv = g.output(a.log);
  const auto ckpt = g.output(a.output);
  if (!val_set.empty()) opt.best_checkpoint = ckpt.string() + ".best";
  opt.on_log = [&out](const TrainLogRow& r) {
    out << "step " << r.step << " loss " << r.total;
    if (!std::isnan(r.val_mse)) out << " val_mse " << r.val_mse << " val_dssim " << r.val_dssim;
    out << "\n";
  };

  NvrModel model(config, g.seed);
  model.set_output_bias(mean_target_color(train_set));
  out << variant << ": " << model.parameters().parameter_count() << " parameters, " << train_set.size()
      << " training samples\n";
  const TrainReport report = train(model, train_set, val_set, opt);
  model.save(ckpt);
  out << "loss " << report.initial_loss << " -> " << report.final_loss << "; checkpoint -> " << ckpt.string() << "\n";
  return 0;
}

struct InferArgs {
  std::string checkpoint;
  std::string scene;
  std::string output = "prediction.png";
};

int cmd_infer(const Globals& g, const InferArgs& a, std::ostream& out) {
  const auto path = g.output(a.output);
  ensure_parent(path);
  write_png(path, network_prediction(a.checkpoint, load_scene(a.scene)));
  out << "prediction -> " << path.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::vector<std::string> images;
  std::string checkpoint;
  std::string manifest;
  double degrade = 1.0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!a.images.empty()) {
    if (a.images.size() != 2) throw DomainError("eval takes two images: predicted and target");
    print_metrics(out, "", eval_metrics(load_image(a.images[0]), load_image(a.images[1])));
    return 0;
  }
  if (a.manifest.empty()) throw DomainError("eval needs two images or --manifest");
  const auto manifest = DatasetManifest::load(a.manifest);
  const auto samples = load_samples(manifest, std::filesystem::path(a.manifest).parent_path(), a.degrade);
  std::vector<const TrainingSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  out << "samples " << samples.size() << "\n";
  print_metrics(out, "splat.", evaluate_splats(ptrs).mean);
  if (!a.checkpoint.empty()) {
    NvrModel model = NvrModel::load(a.checkpoint);
    print_metrics(out, "model.", evaluate(model, ptrs).mean);
  }
  return 0;
}

// ---- edit ----

struct EditArgs {
  std::string scene;
  std::string output;
  std::optional<double> rotate;
  std::vector<double> translate;
  std::optional<double> scale_x, scale_y, scale_z;
  std::vector<double> light;
  std::vector<double> move_light;
  std::optional<double> elevation;
  std::string object;
  std::string appearance;
  std::string checkpoint;
  bool no_render = false;
  int shadow_samples = 16;
};

int cmd_edit(const Globals& g, const EditArgs& a, std::ostream& out) {
  const std::filesystem::path src(a.scene);
  SceneDescription desc = load_scene_description(src);
  const auto dst = g.output(a.output);
  ensure_parent(dst);
  const auto src_dir = src.parent_path();
  std::filesystem::path object_file = src_dir / desc.object_path;
  if (!a.object.empty()) object_file = a.object;
  if (!desc.appearance_path.empty()) desc.appearance_path = relative_to(src_dir / desc.appearance_path, dst);

  if (a.rotate) desc.pose.rotation_y_deg = *a.rotate;
  if (!a.translate.empty()) {
    desc.pose.tx = a.translate[0];
    desc.pose.tz = a.translate[1];
  }
  if (a.scale_x) desc.pose.sx = *a.scale_x;
  if (a.scale_y) desc.pose.sy = *a.scale_y;
  if (a.scale_z) desc.pose.sz = *a.scale_z;
  if (!a.light.empty()) desc.light = to_vec3(a.light);
  if (!a.move_light.empty()) desc.light += to_vec3(a.move_light);
  if (a.elevation) desc.camera.elevation_deg = *a.elevation;
  desc.pose.validate();
  desc.camera.validate();

  Scene scene = make_scene(desc, read_grid(object_file));
  if (!a.appearance.empty()) {
    // Recolor from a new appearance image seen through the edited scene's camera.
    scene.object = capture_object_appearance(scene, AppearanceSource{load_image(a.appearance), scene.camera}).grid;
    object_file = dst;
    object_file.replace_extension(".vxg");
    write_grid(object_file, scene.object);
    desc.appearance_path = relative_to(a.appearance, dst);
  }
  desc.object_path = relative_to(object_file, dst);
  save_scene_description(dst, desc);
  out << "scene -> " << dst.string() << "\n";
  if (a.no_render) return 0;

  auto sibling = [&dst](const std::string& suffix) {
    auto p = dst;
    p.replace_filename(dst.stem().string() + suffix);
    return p;
  };
  RenderSettings rs;
  rs.shadow_samples = a.shadow_samples;
  rs.rng_seed = g.seed;
  write_png(sibling("_oracle.png"), render_scene(scene, rs));
  write_png(sibling("_splat.png"), splat_scene(scene).color);
  out << "renders -> " << sibling("_oracle.png").string() << ", " << sibling("_splat.png").string() << "\n";
  if (!a.checkpoint.empty()) {
    write_png(sibling("_infer.png"), network_prediction(a.checkpoint, scene));
    out << "prediction -> " << sibling("_infer.png").string() << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Voxel scene rendering, appearance capture and neural rerendering"};
  app.name("voxelcast");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Root random seed")->capture_default_str();
  app.add_option("--config", g.config, "Key-value settings file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-dataset", "Generate train and test splits with manifests");
  gen.o_objects = c_gen->add_option("--objects", gen.objects, "Training objects")->capture_default_str();
  gen.o_test = c_gen->add_option("--test-objects", gen.test_objects, "Test objects")->capture_default_str();
  gen.o_views = c_gen->add_option("--views", gen.views, "Training views per object")->capture_default_str();
  gen.o_setting = c_gen->add_option("--setting", gen.setting, "single_color, default_parts or textured")
                      ->capture_default_str();
  c_gen->add_option("--split", gen.split, "train, test or both")
      ->check(CLI::IsMember({"train", "test", "both"}))
      ->capture_default_str();
  gen.o_shadow = c_gen->add_option("--shadow-samples", gen.shadow_samples)->capture_default_str();

  SceneArgs cap, spl, orc;
  auto* c_cap = app.add_subcommand("capture", "Color an object grid from an appearance image");
  c_cap->add_option("--scene", cap.scene)->required()->check(CLI::ExistingFile);
  c_cap->add_option("--image", cap.image, "Appearance image (default: the scene's)")->check(CLI::ExistingFile);
  c_cap->add_option("-o,--output", cap.output)->required();
  c_cap->add_option("--visibility", cap.visibility, "Write the visibility mask grid");

  auto* c_spl = app.add_subcommand("splat", "Splat the scene's colored voxels");
  c_spl->add_option("--scene", spl.scene)->required()->check(CLI::ExistingFile);
  c_spl->add_option("-o,--output", spl.output)->required();
  c_spl->add_option("--depth", spl.depth, "Also write the depth buffer");
  c_spl->add_option("--radius-scale", spl.radius_scale)->capture_default_str();

  auto* c_orc = app.add_subcommand("oracle", "Render the scene with the reference renderer");
  c_orc->add_option("--scene", orc.scene)->required()->check(CLI::ExistingFile);
  c_orc->add_option("-o,--output", orc.output)->required();
  c_orc->add_option("--shadow-samples", orc.shadow_samples)->capture_default_str();
  c_orc->add_flag("--no-indirect", orc.no_indirect, "Skip the indirect bounce");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train NVR or NVR+ on a manifest");
  c_tr->add_option("--manifest", tr.manifest)->required()->check(CLI::ExistingFile);
  c_tr->add_option("--val", tr.val, "Validation manifest")->check(CLI::ExistingFile);
  tr.o_variant = c_tr->add_option("--variant", tr.variant, "nvr or nvr+")->capture_default_str();
  tr.o_steps = c_tr->add_option("--steps", tr.steps)->capture_default_str();
  tr.o_batch = c_tr->add_option("--batch", tr.batch)->capture_default_str();
  tr.o_lr = c_tr->add_option("--lr", tr.lr)->capture_default_str();
  tr.o_beta = c_tr->add_option("--beta", tr.beta, "Perceptual term weight")->capture_default_str();
  c_tr->add_option("--eval-every", tr.eval_every)->capture_default_str();
  c_tr->add_option("-o,--output", tr.output)->capture_default_str();
  c_tr->add_option("--log", tr.log, "CSV log file")->capture_default_str();

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Predict an image for a scene");
  c_inf->add_option("--checkpoint", inf.checkpoint)->required()->check(CLI::ExistingFile);
  c_inf->add_option("--scene", inf.scene)->required()->check(CLI::ExistingFile);
  c_inf->add_option("-o,--output", inf.output)->capture_default_str();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "MSE, DSSIM and perceptual distance");
  c_ev->add_option("images", ev.images, "Predicted and target image")->check(CLI::ExistingFile);
  c_ev->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
  c_ev->add_option("--manifest", ev.manifest)->check(CLI::ExistingFile);
  c_ev->add_option("--degrade", ev.degrade, "Object grid resolution factor")
      ->check(CLI::Range(0.01, 1.0))
      ->capture_default_str();

  EditArgs ed;
  auto* c_ed = app.add_subcommand("edit", "Edit pose, light or appearance of a scene and re-render");
  c_ed->add_option("--scene", ed.scene)->required()->check(CLI::ExistingFile);
  c_ed->add_option("-o,--output", ed.output, "Edited scene file")->required();
  c_ed->add_option("--rotate", ed.rotate, "Rotation about +y in degrees");
  c_ed->add_option("--translate", ed.translate, "tx,tz")->delimiter(',')->expected(2);
  c_ed->add_option("--scale-x", ed.scale_x);
  c_ed->add_option("--scale-y", ed.scale_y);
  c_ed->add_option("--scale-z", ed.scale_z);
  c_ed->add_option("--light", ed.light, "x,y,z")->delimiter(',')->expected(3);
  c_ed->add_option("--move-light", ed.move_light, "dx,dy,dz")->delimiter(',')->expected(3);
  c_ed->add_option("--elevation", ed.elevation, "Camera elevation in degrees");
  c_ed->add_option("--object", ed.object, "Replacement object grid")->check(CLI::ExistingFile);
  c_ed->add_option("--appearance", ed.appearance, "Recolor from this image")->check(CLI::ExistingFile);
  c_ed->add_option("--checkpoint", ed.checkpoint, "Also write a network prediction")->check(CLI::ExistingFile);
  c_ed->add_option("--shadow-samples", ed.shadow_samples)->capture_default_str();
  c_ed->add_flag("--no-render", ed.no_render, "Only write the scene file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (const auto* sub : app.get_subcommands()) failed = sub;
    err << failed->help();
    return 2;
  }

  try {
    if (!g.config.empty()) g.doc = KeyValueDocument::load(g.config);
    if (c_gen->parsed()) return cmd_gen_dataset(g, gen, out, err);
    if (c_cap->parsed()) return cmd_capture(g, cap, out);
    if (c_spl->parsed()) return cmd_splat(g, spl, out);
    if (c_orc->parsed()) return cmd_oracle(g, orc, out);
    if (c_tr->parsed()) return cmd_train(g, tr, out);
    if (c_inf->parsed()) return cmd_infer(g, inf, out);
    if (c_ev->parsed()) return cmd_eval(ev, out);
    if (c_ed->parsed()) return cmd_edit(g, ed, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace voxelcast
