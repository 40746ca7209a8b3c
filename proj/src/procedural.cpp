#include "voxelcast/procedural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace voxelcast {

std::string to_string(AppearanceSetting s) {
  switch (s) {
    case AppearanceSetting::single_color:
      return "single_color";
    case AppearanceSetting::default_parts:
      return "default_parts";
    case AppearanceSetting::textured:
      return "textured";
  }
  return "?";
}

AppearanceSetting parse_appearance_setting(const std::string& name) {
  if (name == "single_color") return AppearanceSetting::single_color;
  if (name == "default_parts") return AppearanceSetting::default_parts;
  if (name == "textured") return AppearanceSetting::textured;
  throw DomainError("unknown appearance setting '" + name + "' (single_color, default_parts, textured)");
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

namespace {

enum class Primitive { box, cylinder, ellipsoid };

struct Part {
  Primitive kind;
  Vec3 center;  // voxel units
  Vec3 half;
};

bool inside(const Part& p, const Vec3& q) {
  const Vec3 d = (q - p.center).cwiseQuotient(p.half);
  switch (p.kind) {
    case Primitive::box:
      return std::abs(d.x()) <= 1.0 && std::abs(d.y()) <= 1.0 && std::abs(d.z()) <= 1.0;
    case Primitive::cylinder:
      return d.x() * d.x() + d.z() * d.z() <= 1.0 && std::abs(d.y()) <= 1.0;
    case Primitive::ellipsoid:
      return d.squaredNorm() <= 1.0;
  }
  return false;
}

Color hsv(double h, double s, double v) {
  h = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(h);
  const double f = h - i, p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (i % 6) {
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    case 5: r = v, g = p, b = q; break;
    default: break;
  }
  return Color(static_cast<float>(r), static_cast<float>(g), static_cast<float>(b));
}

Color random_color(Rng& rng) { return hsv(rng.uniform(), rng.uniform(0.45, 0.9), rng.uniform(0.55, 0.95)); }

/// Smooth lattice value noise in [0, 1].
double value_noise(const Vec3& p, std::uint64_t seed) {
  auto lattice = [seed](int x, int y, int z) {
    const std::uint64_t h = derive_seed(seed, (static_cast<std::uint64_t>(x & 0xFFFF) << 32) ^
                                                  (static_cast<std::uint64_t>(y & 0xFFFF) << 16) ^
                                                  static_cast<std::uint64_t>(z & 0xFFFF));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  };
  const int x0 = static_cast<int>(std::floor(p.x())), y0 = static_cast<int>(std::floor(p.y())),
            z0 = static_cast<int>(std::floor(p.z()));
  auto fade = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double fx = fade(p.x() - x0), fy = fade(p.y() - y0), fz = fade(p.z() - z0);
  double acc = 0.0;
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz)
        acc += (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz) * lattice(x0 + dx, y0 + dy, z0 + dz);
  return acc;
}

/// Labels 6-connected components; returns label per voxel (-1 for empty).
std::vector<int> label_components(const VoxelGrid& grid, int& count) {
  const GridGeometry& g = grid.geometry();
  std::vector<int> label(g.voxel_count(), -1);
  count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    if (!grid.occupied(i) || label[i] >= 0) continue;
    label[i] = count;
    stack.push_back(i);
    while (!stack.empty()) {
      const Cell c = g.cell_at(stack.back());
      stack.pop_back();
      for (int a = 0; a < 3; ++a)
        for (int s : {-1, 1}) {
          Cell n = c;
          n[a] += s;
          if (!g.contains(n)) continue;
          const std::size_t j = g.index(n);
          if (grid.occupied(j) && label[j] < 0) {
            label[j] = count;
            stack.push_back(j);
          }
        }
    }
    ++count;
  }
  return label;
}

}  // namespace

int connected_components(const VoxelGrid& grid) {
  int count = 0;
  label_components(grid, count);
  return count;
}

VoxelGrid generate_object(std::uint64_t seed, AppearanceSetting setting, Split split, const ObjectOptions& options,
                          const SceneLayout& layout) {
  const int n = options.resolution;
  if (n < 4) throw DomainError("object resolution must be >= 4");
  if (options.min_primitives < 1 || options.max_primitives < options.min_primitives)
    throw DomainError("bad primitive count range");
  Rng rng(seed);
  const double mid = 0.5 * n;
  const double rmax = std::min(options.max_radius, mid);
  const double hmax = std::max(1.5, 0.22 * n);

  const int count = rng.uniform_int(options.min_primitives, options.max_primitives);
  std::vector<Part> parts;
  std::vector<int> owner(static_cast<std::size_t>(n) * n * n, -1);
  const GridGeometry g = object_geometry(n, layout);
  auto center_of = [](const Cell& c) { return Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5); };
  auto rasterize = [&](const Part& p, int id) {
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
          const Vec3 q = center_of({x, y, z});
          const double rx = q.x() - mid, rz = q.z() - mid;
          if (rx * rx + rz * rz > rmax * rmax) continue;
          if (inside(p, q)) owner[g.index({x, y, z})] = id;
        }
  };

  for (int k = 0; k < count; ++k) {
    Part p;
    p.kind = static_cast<Primitive>(rng.uniform_int(0, 2));
    p.half = Vec3(rng.uniform(1.5, hmax), rng.uniform(1.5, hmax), rng.uniform(1.5, hmax));
    if (k == 0) {
      // Base: near the mirror plane, resting on y = 0.
      p.center = Vec3(mid + rng.uniform(-1.0, 1.0), p.half.y(), mid + rng.uniform(-2.0, 2.0));
    } else {
      // Anchor on an occupied voxel so the part touches the shape.
      std::vector<std::size_t> filled;
      for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] >= 0) filled.push_back(i);
      const Cell a = g.cell_at(filled[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(filled.size()) - 1))]);
      p.center = center_of(a) + Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    }
    Part mirror = p;
    mirror.center.x() = n - p.center.x();
    parts.push_back(p);
    rasterize(p, k);
    rasterize(mirror, k);
  }

  // Keep the largest component touching the floor.
  VoxelGrid shape(g);
  for (std::size_t i = 0; i < owner.size(); ++i)
    if (owner[i] >= 0) shape.set(i, Color::Ones());
  int ncomp = 0;
  const std::vector<int> label = label_components(shape, ncomp);
  std::vector<std::size_t> size(static_cast<std::size_t>(ncomp), 0);
  std::vector<bool> grounded(static_cast<std::size_t>(ncomp), false);
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] < 0) continue;
    ++size[label[i]];
    if (g.cell_at(i)[1] == 0) grounded[label[i]] = true;
  }
  int keep = -1;
  for (int c = 0; c < ncomp; ++c)
    if (grounded[c] && (keep < 0 || size[c] > size[keep])) keep = c;

  // Colors.
  std::vector<Color> part_colors;
  for (int k = 0; k < count; ++k) part_colors.push_back(random_color(rng));
  const Color base = part_colors[0];
  Color second = hsv(rng.uniform(), rng.uniform(0.45, 0.9), rng.uniform(0.55, 0.95));
  // Keep the pattern colors clearly apart.
  if ((second - base).norm() < 0.35f) second = Color::Ones() - base;
  const bool test = split == Split::test;
  const int pattern = rng.uniform_int(0, 2);  // stripes, checker, noise
  const double period = test ? rng.uniform(4.0, 6.0) : rng.uniform(2.0, 4.0);
  const double angle = (test ? rng.uniform(45.0, 90.0) : rng.uniform(0.0, 45.0)) * std::numbers::pi / 180.0;
  const std::uint64_t noise_seed = rng.next_u64();

  // Pattern scalar per voxel; the first color goes where it is below the
  // threshold. Every pattern is mirror symmetric in x.
  auto pattern_value = [&](const Vec3& q, int kind) {
    const double ax = std::abs(q.x() - mid);
    if (kind == 0) {
      const double u = std::cos(angle) * ax + std::sin(angle) * q.y();
      return std::floor(u / period) - 2.0 * std::floor(u / (2.0 * period));
    }
    if (kind == 1) {
      const double a = std::floor(ax / period) + std::floor(q.y() / period) + std::floor(q.z() / period);
      return a - 2.0 * std::floor(a / 2.0);
    }
    return value_noise(Vec3(ax, q.y(), q.z()) / period, noise_seed);
  };

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < owner.size(); ++i)
    if (keep >= 0 && label[i] == keep) kept.push_back(i);

  std::vector<bool> first(owner.size(), true);
  if (setting == AppearanceSetting::textured && !kept.empty()) {
    auto assign = [&](int kind, double threshold) {
      std::size_t n_first = 0;
      for (std::size_t i : kept) {
        first[i] = pattern_value(center_of(g.cell_at(i)), kind) < threshold;
        n_first += first[i];
      }
      return static_cast<double>(n_first) / static_cast<double>(kept.size());
    };
    const double share = assign(pattern, 0.5);
    if (share < 0.2 || share > 0.8) {
      // Too lopsided on this shape: split the noise field at its median.
      std::vector<double> v;
      for (std::size_t i : kept) v.push_back(pattern_value(center_of(g.cell_at(i)), 2));
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
      assign(2, v[v.size() / 2]);
    }
  }

  VoxelGrid out(g);
  for (std::size_t i : kept) {
    switch (setting) {
      case AppearanceSetting::single_color:
        out.set(i, base);
        break;
      case AppearanceSetting::default_parts:
        out.set(i, part_colors[owner[i]]);
        break;
      case AppearanceSetting::textured:
        out.set(i, first[i] ? base : second);
        break;
    }
  }
  return out;
}

}  // namespace voxelcast
