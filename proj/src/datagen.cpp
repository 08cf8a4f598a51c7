#include "pointseq/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pointseq/geometry.hpp"
#include "pointseq/perturb.hpp"
#include "pointseq/rng.hpp"

namespace pointseq {

std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Cube: return "cube";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::Cone: return "cone";
    case ShapeKind::Plane: return "plane";
  }
  return "?";
}

ShapeKind shape_from_string(const std::string& s) {
  if (s == "sphere") return ShapeKind::Sphere;
  if (s == "cube") return ShapeKind::Cube;
  if (s == "cylinder") return ShapeKind::Cylinder;
  if (s == "torus") return ShapeKind::Torus;
  if (s == "cone") return ShapeKind::Cone;
  if (s == "plane") return ShapeKind::Plane;
  throw std::invalid_argument("unknown shape kind: " + s);
}

namespace {

Point3 sphere_point(Rng& rng, double radius) {
  // gaussian direction, normalized
  double x, y, z, n2;
  do {
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n2 = x * x + y * y + z * z;
  } while (n2 < 1e-12);
  const double inv = radius / std::sqrt(n2);
  return {x * inv, y * inv, z * inv};
}

Point3 cube_point(Rng& rng, double e) {
  // pick a face (all faces have the same area), then uniform on it
  const int face = static_cast<int>(rng.uniform_int(0, 5));
  const double u = rng.uniform(-e, e), v = rng.uniform(-e, e);
  switch (face) {
    case 0: return {e, u, v};
    case 1: return {-e, u, v};
    case 2: return {u, e, v};
    case 3: return {u, -e, v};
    case 4: return {u, v, e};
    default: return {u, v, -e};
  }
}

Point3 cylinder_point(Rng& rng, double radius, double height) {
  // areas: side 2*pi*r*h, each cap pi*r^2
  const double side = 2.0 * M_PI * radius * height;
  const double cap = M_PI * radius * radius;
  const double total = side + 2.0 * cap;
  const double pick = rng.uniform(0.0, total);
  if (pick < side) {
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    const double z = rng.uniform(-height / 2.0, height / 2.0);
    return {radius * std::cos(a), radius * std::sin(a), z};
  }
  const double z = pick < side + cap ? height / 2.0 : -height / 2.0;
  const double rr = radius * std::sqrt(rng.uniform());
  const double a = rng.uniform(0.0, 2.0 * M_PI);
  return {rr * std::cos(a), rr * std::sin(a), z};
}

Point3 torus_point(Rng& rng, double R, double r) {
  // area element is proportional to R + r*cos(theta): rejection on theta
  for (;;) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double accept = (R + r * std::cos(theta)) / (R + r);
    if (rng.uniform() <= accept) {
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double w = R + r * std::cos(theta);
      return {w * std::cos(phi), w * std::sin(phi), r * std::sin(theta)};
    }
  }
}

Point3 cone_point(Rng& rng, double radius, double height) {
  // lateral area pi*r*slant, base area pi*r^2
  const double slant = std::sqrt(radius * radius + height * height);
  const double lateral = M_PI * radius * slant;
  const double base = M_PI * radius * radius;
  const double pick = rng.uniform(0.0, lateral + base);
  if (pick < lateral) {
    // uniform over the lateral surface: radius fraction ~ sqrt(u)
    const double f = std::sqrt(rng.uniform());
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    const double rr = radius * f;
    return {rr * std::cos(a), rr * std::sin(a), height * (1.0 - f) - height / 2.0};
  }
  const double rr = radius * std::sqrt(rng.uniform());
  const double a = rng.uniform(0.0, 2.0 * M_PI);
  return {rr * std::cos(a), rr * std::sin(a), -height / 2.0};
}

Point3 plane_point(Rng& rng, double e) {
  return {rng.uniform(-e, e), rng.uniform(-e, e), 0.0};
}

}  // namespace

std::vector<Point3> sample_shape_surface(ShapeKind kind, const ShapeParams& p, int n_points,
                                         std::uint64_t seed) {
  if (n_points < 8) throw std::invalid_argument("n_points must be >= 8");
  Rng rng(seed);
  std::vector<Point3> pts(n_points);
  for (int i = 0; i < n_points; ++i) {
    switch (kind) {
      case ShapeKind::Sphere: pts[i] = sphere_point(rng, p.radius); break;
      case ShapeKind::Cube: pts[i] = cube_point(rng, p.extent); break;
      case ShapeKind::Cylinder: pts[i] = cylinder_point(rng, p.radius, p.height); break;
      case ShapeKind::Torus: pts[i] = torus_point(rng, p.radius, p.minor_radius); break;
      case ShapeKind::Cone: pts[i] = cone_point(rng, p.radius, p.height); break;
      case ShapeKind::Plane: pts[i] = plane_point(rng, p.extent); break;
      default: throw std::invalid_argument("unknown shape kind");
    }
  }
  return pts;
}

PointCloud gen_shape(ShapeKind kind, int n_points, std::uint64_t seed, const ShapeParams& params) {
  return normalize(PointCloud::from_points(sample_shape_surface(kind, params, n_points, seed)));
}

DatasetSplits make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.classes < 1 || spec.classes > kShapeKindCount)
    throw std::invalid_argument("classes must be in 1..6");
  if (spec.per_class < 1) throw std::invalid_argument("per_class must be >= 1");

  std::vector<LabeledItem> items;
  std::vector<std::string> names;
  for (int k = 0; k < spec.classes; ++k) names.push_back(to_string(static_cast<ShapeKind>(k)));

  std::uint64_t item_id = 0;
  for (int k = 0; k < spec.classes; ++k) {
    for (int j = 0; j < spec.per_class; ++j) {
      const std::uint64_t item_seed = mix_seed(seed, k, j);
      ShapeParams p;
      if (spec.vary_params) {
        Rng prng(mix_seed(item_seed, 0xA11));
        p.radius = prng.uniform(0.7, 1.3);
        p.minor_radius = p.radius * prng.uniform(0.2, 0.4);
        p.height = prng.uniform(1.0, 2.0);
        p.extent = prng.uniform(0.7, 1.3);
      }
      PointCloud c = gen_shape(static_cast<ShapeKind>(k), spec.n_points, mix_seed(item_seed, 0xB22), p);
      if (spec.random_pose) c = normalize(rotate(c, mix_seed(item_seed, 0xC33)));
      items.push_back(LabeledItem{std::move(c), k, item_id++});
    }
  }

  // seeded shuffle, then 80/20
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5911FF));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_train = items.size() * 8 / 10;

  DatasetSplits out;
  out.train.class_names = names;
  out.train.split = "train";
  out.test.class_names = names;
  out.test.split = "test";
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? out.train : out.test;
    dst.items.push_back(std::move(items[order[i]]));
  }
  return out;
}

}  // namespace pointseq
