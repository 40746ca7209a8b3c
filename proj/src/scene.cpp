#include "voxelcast/scene.hpp"

#include <cmath>
#include <numbers>

#include "voxelcast/kv_document.hpp"

namespace voxelcast {

namespace {

/// cos/sin of an angle in degrees, exact on quarter turns.
void cos_sin_deg(double deg, double& c, double& s) {
  const double quarters = deg / 90.0;
  if (quarters == std::round(quarters)) {
    const long q = ((static_cast<long>(std::round(quarters)) % 4) + 4) % 4;
    constexpr double kc[4] = {1.0, 0.0, -1.0, 0.0};
    constexpr double ks[4] = {0.0, 1.0, 0.0, -1.0};
    c = kc[q];
    s = ks[q];
    return;
  }
  const double r = deg * std::numbers::pi / 180.0;
  c = std::cos(r);
  s = std::sin(r);
}

}  // namespace

void Pose::validate() const {
  if (!(sx > 0.0 && sy > 0.0 && sz > 0.0)) throw DomainError("pose scale must be > 0 on every axis");
}

GridGeometry SceneLayout::geometry() const {
  GridGeometry g;
  g.dims = {resolution, resolution, resolution};
  g.voxel_size = voxel_size();
  g.origin = Vec3::Constant(-half_extent);
  return g;
}

bool Scene::within_training_envelope() const {
  return std::abs(light.x()) <= 1.5 && std::abs(light.z()) <= 1.5 && light.y() >= 2.5 && light.y() <= 3.0 &&
         std::abs(pose.tx) <= 0.5 && std::abs(pose.tz) <= 0.5;
}

GridGeometry object_geometry(int n, const SceneLayout& layout) {
  GridGeometry g;
  g.dims = {n, n, n};
  g.voxel_size = layout.voxel_size();
  const double half = 0.5 * n * g.voxel_size;
  g.origin = Vec3(-half, 0.0, -half);
  return g;
}

Vec3 object_to_world(const Pose& pose, const Vec3& p, double ground_height) {
  double c = 1.0, s = 0.0;
  cos_sin_deg(pose.rotation_y_deg, c, s);
  const Vec3 q(pose.sx * p.x(), pose.sy * p.y(), pose.sz * p.z());
  return {c * q.x() + s * q.z() + pose.tx, q.y() + ground_height, -s * q.x() + c * q.z() + pose.tz};
}

Vec3 world_to_object(const Pose& pose, const Vec3& w, double ground_height) {
  double c = 1.0, s = 0.0;
  cos_sin_deg(pose.rotation_y_deg, c, s);
  const Vec3 d(w.x() - pose.tx, w.y() - ground_height, w.z() - pose.tz);
  const Vec3 q(c * d.x() - s * d.z(), d.y(), s * d.x() + c * d.z());
  return {q.x() / pose.sx, q.y() / pose.sy, q.z() / pose.sz};
}

AssembledScene assemble_scene(const Scene& scene, bool with_ground) {
  scene.pose.validate();
  if (scene.ground.layers < 0 || scene.ground.layers > scene.layout.resolution)
    throw DomainError("ground layers out of range");
  const GridGeometry geo = scene.layout.geometry();
  const double ground_h = scene.layout.ground_height(scene.ground.layers);
  AssembledScene out{VoxelGrid(geo), 0};

  const VoxelGrid& obj = scene.object;
  const GridGeometry& og = obj.geometry();
  for (std::size_t i = 0; i < obj.voxel_count(); ++i) {
    if (!obj.occupied(i)) continue;
    const Vec3 w = object_to_world(scene.pose, og.center(og.cell_at(i)), ground_h);
    if (!geo.contains(geo.cell_of(w))) ++out.clipped;
  }

  for (std::size_t i = 0; i < geo.voxel_count(); ++i) {
    const Cell cell = geo.cell_at(i);
    const Cell src = og.cell_of(world_to_object(scene.pose, geo.center(cell), ground_h));
    if (og.contains(src) && obj.occupied(src)) {
      out.grid.set(i, obj.color(src));
    } else if (with_ground && cell[1] < scene.ground.layers) {
      out.grid.set(i, scene.ground.color);
    }
  }
  return out;
}

VoxelGrid world_to_camera(const VoxelGrid& world, const Camera& camera) {
  camera.validate();
  const GridGeometry& wg = world.geometry();
  GridGeometry cg = wg;
  cg.origin = -0.5 * wg.voxel_size * Vec3(wg.dims[0], wg.dims[1], wg.dims[2]);
  VoxelGrid out(cg);
  const Vec3 r = camera.right(), u = camera.up(), f = camera.forward();
  for (std::size_t i = 0; i < cg.voxel_count(); ++i) {
    const Vec3 q = cg.center(cg.cell_at(i));
    const Vec3 p = q.x() * r + q.y() * u + q.z() * f;
    const Cell src = wg.cell_of(p);
    if (wg.contains(src) && world.occupied(src)) out.set(i, world.color(src));
  }
  return out;
}

SceneDescription parse_scene_description(const std::string& text) {
  const auto doc = KeyValueDocument::parse(text);
  SceneDescription d;
  d.object_path = doc.get("object");
  d.appearance_path = doc.get_or("appearance", std::string());
  d.pose.rotation_y_deg = doc.get_or("pose.rotation_y", 0.0);
  if (doc.has("pose.translation")) {
    const auto t = doc.get_doubles("pose.translation", 2);
    d.pose.tx = t[0];
    d.pose.tz = t[1];
  }
  if (doc.has("pose.scale")) {
    const auto s = doc.get_doubles("pose.scale", 3);
    d.pose = Pose{d.pose.rotation_y_deg, d.pose.tx, d.pose.tz, s[0], s[1], s[2]};
  }
  d.ground.layers = doc.get_or("ground.layers", d.ground.layers);
  if (doc.has("ground.color")) {
    const auto c = doc.get_doubles("ground.color", 3);
    d.ground.color = Color(static_cast<float>(c[0]), static_cast<float>(c[1]), static_cast<float>(c[2]));
  }
  d.ground.specular = doc.get_or("ground.specular", d.ground.specular);
  if (doc.has("light")) {
    const auto l = doc.get_doubles("light", 3);
    d.light = Vec3(l[0], l[1], l[2]);
  }
  d.camera.elevation_deg = doc.get_or("camera.elevation", d.camera.elevation_deg);
  d.camera.distance = doc.get_or("camera.distance", d.camera.distance);
  d.camera.focal_length = doc.get_or("camera.focal_length", d.camera.focal_length);
  d.camera.sensor_width = doc.get_or("camera.sensor_width", d.camera.sensor_width);
  if (doc.has("camera.image")) {
    const auto wh = doc.get_doubles("camera.image", 2);
    d.camera.width = static_cast<int>(wh[0]);
    d.camera.height = static_cast<int>(wh[1]);
  }
  d.layout.resolution = doc.get_or("scene.resolution", d.layout.resolution);
  d.layout.half_extent = doc.get_or("scene.half_extent", d.layout.half_extent);
  d.pose.validate();
  d.camera.validate();
  return d;
}

std::string serialize_scene_description(const SceneDescription& d) {
  KeyValueDocument doc;
  doc.set("object", d.object_path);
  if (!d.appearance_path.empty()) doc.set("appearance", d.appearance_path);
  doc.set("pose.rotation_y", d.pose.rotation_y_deg);
  doc.set("pose.translation", std::vector<double>{d.pose.tx, d.pose.tz});
  doc.set("pose.scale", std::vector<double>{d.pose.sx, d.pose.sy, d.pose.sz});
  doc.set("ground.layers", d.ground.layers);
  doc.set("ground.color", std::vector<double>{d.ground.color.x(), d.ground.color.y(), d.ground.color.z()});
  doc.set("ground.specular", d.ground.specular);
  doc.set("light", std::vector<double>{d.light.x(), d.light.y(), d.light.z()});
  doc.set("camera.elevation", d.camera.elevation_deg);
  doc.set("camera.distance", d.camera.distance);
  doc.set("camera.focal_length", d.camera.focal_length);
  doc.set("camera.sensor_width", d.camera.sensor_width);
  doc.set("camera.image", std::vector<double>{static_cast<double>(d.camera.width), static_cast<double>(d.camera.height)});
  doc.set("scene.resolution", d.layout.resolution);
  doc.set("scene.half_extent", d.layout.half_extent);
  return doc.serialize();
}

SceneDescription load_scene_description(const std::filesystem::path& path) {
  return parse_scene_description(KeyValueDocument::load(path).serialize());
}

void save_scene_description(const std::filesystem::path& path, const SceneDescription& desc) {
  KeyValueDocument::parse(serialize_scene_description(desc)).save(path);
}

Scene make_scene(const SceneDescription& desc, VoxelGrid object) {
  Scene s;
  s.object = std::move(object);
  s.pose = desc.pose;
  s.ground = desc.ground;
  s.light = desc.light;
  s.camera = desc.camera;
  s.layout = desc.layout;
  return s;
}

Scene load_scene(const std::filesystem::path& path) {
  const auto desc = load_scene_description(path);
  std::filesystem::path obj = desc.object_path;
  if (obj.is_relative()) obj = path.parent_path() / obj;
  return make_scene(desc, read_grid(obj));
}

}  // namespace voxelcast
