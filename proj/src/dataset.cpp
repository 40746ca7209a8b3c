#include "voxelcast/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "voxelcast/appearance.hpp"
#include "voxelcast/io.hpp"

namespace voxelcast {

Image render_scene(const Scene& scene, const RenderSettings& settings) {
  RenderSettings rs = settings;
  rs.ground_layers = scene.ground.layers;
  rs.floor_specular = scene.ground.specular;
  AreaLight light;
  light.center = scene.light;
  return render_target(assemble_scene(scene).grid, light, scene.camera, rs);
}

SplatCanvas splat_scene(const Scene& scene, const SplatOptions& options) {
  return splat(assemble_scene(scene, false).grid, scene.camera, options);
}

SamplingSpec SamplingSpec::train_defaults(std::uint64_t seed) {
  SamplingSpec s;
  s.rng_seed = seed;
  return s;
}

SamplingSpec SamplingSpec::test_defaults(std::uint64_t seed) {
  SamplingSpec s;
  s.split = Split::test;
  s.elevation_min = 15.0;
  s.elevation_max = 45.0;
  s.views_per_object = 19;
  s.rng_seed = seed;
  return s;
}

void SamplingSpec::validate() const {
  auto range = [](double lo, double hi, const char* what) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi)) throw DomainError(std::string("bad range: ") + what);
  };
  range(elevation_min, elevation_max, "elevation");
  range(rotation_min, rotation_max, "rotation");
  range(light_y_min, light_y_max, "light y");
  if (elevation_min < 0.0 || elevation_max >= 90.0) throw DomainError("elevation must lie in [0, 90)");
  if (!(translation >= 0.0 && translation <= 0.5)) throw DomainError("translation box outside the scene envelope");
  if (!(light_xz >= 0.0 && light_xz <= 1.5)) throw DomainError("light x/z box outside the scene envelope");
  if (light_y_min < 2.5 || light_y_max > 3.0) throw DomainError("light height outside the scene envelope");
  if (views_per_object < 1) throw DomainError("views_per_object must be positive");
  if (split == Split::test) {
    if (!(rotation_step_deg > 0.0)) throw DomainError("rotation step must be positive");
    if (rotation_min + (views_per_object - 1) * rotation_step_deg > rotation_max + 1e-9)
      throw DomainError("rotation sweep exceeds the rotation range");
  }
}

void SamplingSpec::write(KeyValueDocument& doc, const std::string& p) const {
  doc.set(p + "split", to_string(split));
  doc.set(p + "elevation", std::vector<double>{elevation_min, elevation_max});
  doc.set(p + "rotation", std::vector<double>{rotation_min, rotation_max});
  doc.set(p + "translation", translation);
  doc.set(p + "light_xz", light_xz);
  doc.set(p + "light_y", std::vector<double>{light_y_min, light_y_max});
  doc.set(p + "views", views_per_object);
  doc.set(p + "rotation_step", rotation_step_deg);
  doc.set(p + "seed", std::to_string(rng_seed));
}

SamplingSpec SamplingSpec::read(const KeyValueDocument& doc, const std::string& p, SamplingSpec s) {
  auto pair = [&](const std::string& key, double& lo, double& hi) {
    if (!doc.has(p + key)) return;
    const auto v = doc.get_doubles(p + key, 2);
    lo = v[0];
    hi = v[1];
  };
  pair("elevation", s.elevation_min, s.elevation_max);
  pair("rotation", s.rotation_min, s.rotation_max);
  pair("light_y", s.light_y_min, s.light_y_max);
  s.translation = doc.get_or(p + "translation", s.translation);
  s.light_xz = doc.get_or(p + "light_xz", s.light_xz);
  s.views_per_object = doc.get_or(p + "views", s.views_per_object);
  s.rotation_step_deg = doc.get_or(p + "rotation_step", s.rotation_step_deg);
  if (doc.has(p + "seed")) s.rng_seed = std::stoull(doc.get(p + "seed"));
  return s;
}

std::vector<ViewSample> sample_views(const SamplingSpec& spec, std::size_t object_index) {
  spec.validate();
  Rng rng(derive_seed(spec.rng_seed, object_index));
  const int n = spec.views_per_object;
  auto light = [&] {
    const double x = rng.uniform(-spec.light_xz, spec.light_xz);
    const double y = rng.uniform(spec.light_y_min, spec.light_y_max);
    const double z = rng.uniform(-spec.light_xz, spec.light_xz);
    return Vec3(x, y, z);
  };
  std::vector<ViewSample> views(static_cast<std::size_t>(n));
  if (spec.split == Split::train) {
    for (auto& v : views) {
      v.elevation_deg = rng.uniform(spec.elevation_min, spec.elevation_max);
      v.rotation_deg = rng.uniform(spec.rotation_min, spec.rotation_max);
      v.tx = rng.uniform(-spec.translation, spec.translation);
      v.tz = rng.uniform(-spec.translation, spec.translation);
      v.light = light();
    }
    return views;
  }
  const double elevation = rng.uniform(spec.elevation_min, spec.elevation_max);
  double t0[2], t1[2];
  for (double& t : t0) t = rng.uniform(-spec.translation, spec.translation);
  for (double& t : t1) t = rng.uniform(-spec.translation, spec.translation);
  const Vec3 l0 = light();
  const Vec3 l1 = light();
  for (int i = 0; i < n; ++i) {
    const double a = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    ViewSample& v = views[static_cast<std::size_t>(i)];
    v.elevation_deg = elevation;
    v.rotation_deg = spec.rotation_min + i * spec.rotation_step_deg;
    v.tx = (1.0 - a) * t0[0] + a * t1[0];
    v.tz = (1.0 - a) * t0[1] + a * t1[1];
    v.light = (1.0 - a) * l0 + a * l1;
  }
  return views;
}

std::uint64_t object_seed(std::uint64_t seed, Split split, std::size_t object_index) {
  return derive_seed(seed, 2 * static_cast<std::uint64_t>(object_index) + (split == Split::test ? 1 : 0));
}

int source_view(const SamplingSpec& spec) { return spec.split == Split::train ? 0 : spec.views_per_object / 2; }

// ---- manifest ----

namespace {

std::string join(const Vec3& v) {
  return io::format_double(v.x()) + "," + io::format_double(v.y()) + "," + io::format_double(v.z());
}

std::vector<double> split_numbers(const std::string& key, const std::string& s, std::size_t expected) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty()) throw FormatError("record field '" + key + "': not a number: " + tok);
    out.push_back(v);
  }
  if (out.size() != expected) throw FormatError("record field '" + key + "': wrong number of values");
  return out;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw FormatError("unknown split: " + s);
}

std::string serialize_record(const ManifestRecord& r) {
  std::ostringstream o;
  o << "record split=" << to_string(r.split) << " object=" << r.object << " seed=" << r.object_seed
    << " view=" << r.view << " source=" << r.source_view << " scene=" << r.scene << " voxels=" << r.voxels
    << " albedo=" << r.albedo << " appearance=" << r.appearance << " splat=" << r.splat << " depth=" << r.depth
    << " target=" << r.target << " light=" << join(r.light) << " elevation=" << io::format_double(r.elevation_deg)
    << " rotation=" << io::format_double(r.rotation_deg) << " translation=" << io::format_double(r.tx) << ","
    << io::format_double(r.tz);
  return o.str();
}

ManifestRecord parse_record(const std::string& line, int lineno) {
  std::istringstream in(line);
  std::string tok;
  in >> tok;  // "record"
  std::map<std::string, std::string> f;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected key=value, got " + tok);
    f[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = f.find(key);
    if (it == f.end()) throw FormatError("manifest line " + std::to_string(lineno) + ": missing field " + key);
    return it->second;
  };
  auto integer = [&](const char* key) {
    const std::string& s = get(key);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw FormatError("manifest line " + std::to_string(lineno) + ": bad integer " + s);
    return v;
  };
  ManifestRecord r;
  r.split = parse_split(get("split"));
  r.object = static_cast<int>(integer("object"));
  r.object_seed = std::stoull(get("seed"));
  r.view = static_cast<int>(integer("view"));
  r.source_view = static_cast<int>(integer("source"));
  r.scene = get("scene");
  r.voxels = get("voxels");
  r.albedo = get("albedo");
  r.appearance = get("appearance");
  r.splat = get("splat");
  r.depth = get("depth");
  r.target = get("target");
  const auto l = split_numbers("light", get("light"), 3);
  r.light = Vec3(l[0], l[1], l[2]);
  r.elevation_deg = split_numbers("elevation", get("elevation"), 1)[0];
  r.rotation_deg = split_numbers("rotation", get("rotation"), 1)[0];
  const auto t = split_numbers("translation", get("translation"), 2);
  r.tx = t[0];
  r.tz = t[1];
  return r;
}

}  // namespace

std::string DatasetManifest::serialize() const {
  std::string out = "# voxelcast dataset manifest\n";
  out += settings.serialize();
  for (const auto& r : records) out += serialize_record(r) + "\n";
  return out;
}

DatasetManifest DatasetManifest::parse(const std::string& text) {
  DatasetManifest m;
  std::string settings_text;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("record ", 0) == 0) {
      m.records.push_back(parse_record(line, lineno));
    } else {
      settings_text += line + "\n";
    }
  }
  m.settings = KeyValueDocument::parse(settings_text);
  m.split = parse_split(m.settings.get("dataset.split"));
  for (const auto& r : m.records)
    if (r.split != m.split) throw FormatError("manifest mixes splits");
  return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const { io::write_text_atomic(path, serialize()); }

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  try {
    return parse(io::read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string manifest_filename(Split split) { return "manifest_" + to_string(split) + ".txt"; }

void verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir) {
  auto check = [&](const std::string& rel, const auto& parse) {
    const auto p = dir / rel;
    if (!std::filesystem::exists(p)) throw FormatError("missing file: " + p.string());
    try {
      parse(p);
    } catch (const std::exception& e) {
      throw FormatError("unreadable file " + p.string() + ": " + e.what());
    }
  };
  auto grid = [](const std::filesystem::path& p) { read_grid(p); };
  auto png = [](const std::filesystem::path& p) { read_png(p); };
  auto raw = [](const std::filesystem::path& p) { read_raw_image(p); };
  auto scene = [](const std::filesystem::path& p) { load_scene(p); };
  for (const auto& r : manifest.records) {
    check(r.scene, scene);
    check(r.voxels, grid);
    check(r.albedo, grid);
    check(r.appearance, png);
    check(r.splat, png);
    check(r.depth, raw);
    check(r.target, png);
  }
}

// ---- generation ----

namespace {

struct ObjectOutcome {
  std::vector<ManifestRecord> records;
  std::vector<std::string> failures;
  int invalid = 0;
};

std::string format_name(const char* pattern, const std::string& split, int a, int b = -1) {
  char buf[64];
  if (b < 0)
    std::snprintf(buf, sizeof buf, pattern, split.c_str(), a);
  else
    std::snprintf(buf, sizeof buf, pattern, split.c_str(), a, b);
  return buf;
}

Scene view_scene(const VoxelGrid& object, const ViewSample& v, const Camera& camera) {
  Scene s;
  s.object = object;
  s.pose.rotation_y_deg = v.rotation_deg;
  s.pose.tx = v.tx;
  s.pose.tz = v.tz;
  s.light = v.light;
  s.camera = camera;
  s.camera.elevation_deg = v.elevation_deg;
  return s;
}

ObjectOutcome generate_object_views(const DatasetOptions& opt, const std::filesystem::path& out, int index) {
  ObjectOutcome res;
  const SamplingSpec& spec = opt.spec;
  const std::string split = to_string(spec.split);
  const std::uint64_t seed = object_seed(opt.seed, spec.split, static_cast<std::size_t>(index));
  const std::vector<ViewSample> views = sample_views(spec, static_cast<std::size_t>(index));
  const int n = static_cast<int>(views.size());
  const int src = source_view(spec);
  auto render_settings = [&](int view) {
    RenderSettings rs = opt.render;
    rs.rng_seed = derive_seed(derive_seed(opt.seed, seed), static_cast<std::uint64_t>(view));
    return rs;
  };
  auto fail_all = [&](const std::string& why) {
    res.records.clear();
    res.invalid = n;
    res.failures.push_back(split + " object " + std::to_string(index) + ": " + why);
  };

  const std::string albedo_rel = format_name("objects/%s_o%04d_albedo.vxg", split, index);
  const std::string voxels_rel = format_name("objects/%s_o%04d.vxg", split, index);
  const std::string source_rel = format_name("targets/%s_o%04d_v%02d.png", split, index, src);

  VoxelGrid albedo;
  VoxelGrid captured;
  Image source_image;
  try {
    albedo = generate_object(seed, opt.setting, spec.split, opt.object);
    const Scene s = view_scene(albedo, views[static_cast<std::size_t>(src)], opt.camera);
    if (assemble_scene(s).clipped > 0) throw DomainError("appearance view places the object outside the grid");
    source_image = render_scene(s, render_settings(src)).quantized();
    captured = capture_object_appearance(s, AppearanceSource{source_image, s.camera}).grid;
    write_grid(out / albedo_rel, albedo);
    write_grid(out / voxels_rel, captured);
  } catch (const std::exception& e) {
    fail_all(e.what());
    return res;
  }

  for (int v = 0; v < n; ++v) {
    const ViewSample& vs = views[static_cast<std::size_t>(v)];
    ManifestRecord r;
    r.split = spec.split;
    r.object = index;
    r.object_seed = seed;
    r.view = v;
    r.source_view = src;
    r.scene = format_name("scenes/%s_o%04d_v%02d.scene", split, index, v);
    r.voxels = voxels_rel;
    r.albedo = albedo_rel;
    r.appearance = source_rel;
    r.splat = format_name("splats/%s_o%04d_v%02d.png", split, index, v);
    r.depth = format_name("splats/%s_o%04d_v%02d_depth.imf", split, index, v);
    r.target = format_name("targets/%s_o%04d_v%02d.png", split, index, v);
    r.light = vs.light;
    r.elevation_deg = vs.elevation_deg;
    r.rotation_deg = vs.rotation_deg;
    r.tx = vs.tx;
    r.tz = vs.tz;
    try {
      const Scene truth = view_scene(albedo, vs, opt.camera);
      if (assemble_scene(truth).clipped > 0) throw DomainError("object leaves the scene grid");
      const Image target = v == src ? source_image : render_scene(truth, render_settings(v));
      Scene colored = truth;
      colored.object = captured;
      const SplatCanvas canvas = splat_scene(colored, opt.splat);
      if (canvas.covered_count() == 0) throw DomainError("splat covers no pixel");

      SceneDescription desc;
      desc.object_path = "../" + voxels_rel;
      desc.appearance_path = "../" + source_rel;
      desc.pose = colored.pose;
      desc.ground = colored.ground;
      desc.light = colored.light;
      desc.camera = colored.camera;
      desc.layout = colored.layout;
      write_png(out / r.target, target);
      write_splat(out / r.splat, out / r.depth, canvas);
      save_scene_description(out / r.scene, desc);
      res.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      if (v == src) {
        fail_all(e.what());
        return res;
      }
      ++res.invalid;
      res.failures.push_back(split + " object " + std::to_string(index) + " view " + std::to_string(v) + ": " +
                             e.what());
    }
  }
  return res;
}

}  // namespace

DatasetManifest generate_dataset(const DatasetOptions& opt, const std::filesystem::path& out,
                                 const std::function<void(const std::string&)>& log) {
  opt.spec.validate();
  opt.camera.validate();
  if (opt.objects < 1) throw DomainError("dataset needs at least one object");
  for (const char* sub : {"objects", "scenes", "targets", "splats"}) std::filesystem::create_directories(out / sub);

  std::vector<ObjectOutcome> outcomes(static_cast<std::size_t>(opt.objects));
  parallel_for(outcomes.size(), [&](std::size_t i) {
    outcomes[i] = generate_object_views(opt, out, static_cast<int>(i));
  });

  DatasetManifest m;
  m.split = opt.spec.split;
  m.settings.set("dataset.split", to_string(opt.spec.split));
  m.settings.set("dataset.setting", to_string(opt.setting));
  m.settings.set("dataset.objects", opt.objects);
  m.settings.set("dataset.seed", std::to_string(opt.seed));
  opt.spec.write(m.settings, "sampling.");
  m.settings.set("object.resolution", opt.object.resolution);
  m.settings.set("object.max_radius", opt.object.max_radius);
  m.settings.set("object.primitives", std::vector<double>{static_cast<double>(opt.object.min_primitives),
                                                          static_cast<double>(opt.object.max_primitives)});
  m.settings.set("render.shadow_samples", opt.render.shadow_samples);
  m.settings.set("render.indirect_samples", opt.render.indirect_bounce ? opt.render.indirect_samples : 0);
  m.settings.set("render.ambient", opt.render.ambient);
  m.settings.set("splat.radius_scale", opt.splat.radius_scale);
  m.settings.set("splat.fixed_radius", opt.splat.fixed_radius);
  m.settings.set("camera.distance", opt.camera.distance);
  m.settings.set("camera.focal_length", opt.camera.focal_length);
  m.settings.set("camera.image", std::vector<double>{static_cast<double>(opt.camera.width),
                                                     static_cast<double>(opt.camera.height)});

  std::size_t invalid = 0;
  std::size_t total = 0;
  for (auto& o : outcomes) {
    total += o.records.size() + static_cast<std::size_t>(o.invalid);
    invalid += static_cast<std::size_t>(o.invalid);
    for (const auto& f : o.failures)
      if (log) log("invalid sample: " + f);
    for (auto& r : o.records) m.records.push_back(std::move(r));
  }
  m.settings.set("dataset.invalid", static_cast<int>(invalid));
  if (invalid * 100 > total)
    throw DatasetError(std::to_string(invalid) + " of " + std::to_string(total) + " samples invalid (limit 1%)");
  m.save(out / manifest_filename(opt.spec.split));
  return m;
}

std::vector<TrainingSample> load_samples(const DatasetManifest& manifest, const std::filesystem::path& dir,
                                         double degrade, const SplatOptions& splat_options) {
  std::vector<TrainingSample> samples(manifest.records.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const ManifestRecord& r = manifest.records[i];
    Scene scene = load_scene(dir / r.scene);
    Image target = read_png(dir / r.target);
    Image splat_image;
    if (degrade < 1.0) {
      scene.object = degrade_resolution(scene.object, degrade);
      splat_image = splat_scene(scene, splat_options).color.quantized();
    } else {
      splat_image = read_png(dir / r.splat);
    }
    samples[i] = TrainingSample::from_scene(scene, std::move(splat_image), std::move(target));
  });
  return samples;
}

}  // namespace voxelcast
