#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pointseq/datagen.hpp"
#include "pointseq/geometry.hpp"
#include "pointseq/io.hpp"
#include "pointseq/rng.hpp"

using namespace pointseq;

TEST_CASE("centered sphere normalizes to unit point norms") {
  // antipodal pairs put the centroid exactly at the origin, so normalization
  // only rescales and every point lands on the unit sphere
  ShapeParams params;
  params.radius = 2.0;
  const auto half = sample_shape_surface(ShapeKind::Sphere, params, 100, 1);
  std::vector<Point3> pts;
  for (const Point3& p : half) {
    pts.push_back(p);
    pts.push_back({-p.x, -p.y, -p.z});
  }
  const PointCloud c = normalize(PointCloud::from_points(std::move(pts)));
  for (const Point3& p : c.points) CHECK(std::abs(norm(p) - 1.0) < 1e-9);
}

TEST_CASE("raw sphere samples have the requested radius") {
  ShapeParams params;
  params.radius = 1.3;
  for (const Point3& p : sample_shape_surface(ShapeKind::Sphere, params, 100, 2))
    CHECK(norm(p) == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("raw cube samples touch a face") {
  ShapeParams params;
  params.extent = 0.8;
  const auto pts = sample_shape_surface(ShapeKind::Cube, params, 300, 2);
  for (const Point3& p : pts) {
    const double m = std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)});
    CHECK(m == doctest::Approx(0.8).epsilon(1e-12));
  }
}

TEST_CASE("raw torus samples satisfy the implicit surface equation") {
  ShapeParams params;
  params.radius = 1.0;
  params.minor_radius = 0.3;
  const auto pts = sample_shape_surface(ShapeKind::Torus, params, 500, 3);
  for (const Point3& p : pts) {
    const double w = std::sqrt(p.x * p.x + p.y * p.y) - 1.0;
    CHECK(std::abs(w * w + p.z * p.z - 0.09) < 1e-9);
  }
}

TEST_CASE("gen_shape output satisfies the normalization contract") {
  for (int k = 0; k < kShapeKindCount; ++k) {
    const PointCloud c = gen_shape(static_cast<ShapeKind>(k), 128, 40 + k);
    double cx = 0, cy = 0, cz = 0, mx = 0;
    for (const Point3& p : c.points) {
      cx += p.x;
      cy += p.y;
      cz += p.z;
      mx = std::max(mx, norm(p));
    }
    CHECK(std::abs(cx / 128) < 1e-9);
    CHECK(std::abs(cy / 128) < 1e-9);
    CHECK(std::abs(cz / 128) < 1e-9);
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gen_shape is deterministic and validates input") {
  const PointCloud a = gen_shape(ShapeKind::Cone, 64, 9);
  const PointCloud b = gen_shape(ShapeKind::Cone, 64, 9);
  for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].x == b.points[i].x);
  CHECK_THROWS_AS(gen_shape(ShapeKind::Cone, 4, 9), std::invalid_argument);
  CHECK_THROWS_AS(shape_from_string("blob"), std::invalid_argument);
}

TEST_CASE("make_dataset: balanced classes, 80/20 split, deterministic") {
  DatasetSpec spec;
  spec.classes = 4;
  spec.per_class = 50;
  spec.n_points = 64;
  const DatasetSplits d = make_dataset(spec, 123);
  CHECK(d.train.items.size() == 160);
  CHECK(d.test.items.size() == 40);

  std::vector<int> hist(4, 0);
  for (const auto& item : d.train.items) hist[item.label]++;
  for (const auto& item : d.test.items) hist[item.label]++;
  for (int h : hist) CHECK(h == 50);

  // splits are disjoint by item id
  std::vector<char> seen(200, 0);
  for (const auto& item : d.train.items) seen[item.item_id] = 1;
  for (const auto& item : d.test.items) {
    CHECK(!seen[item.item_id]);
    seen[item.item_id] = 1;
  }

  const DatasetSplits d2 = make_dataset(spec, 123);
  REQUIRE(d2.train.items.size() == d.train.items.size());
  for (std::size_t i = 0; i < d.train.items.size(); ++i) {
    CHECK(d2.train.items[i].item_id == d.train.items[i].item_id);
    CHECK(d2.train.items[i].cloud.points[0].x == d.train.items[i].cloud.points[0].x);
  }
}

TEST_CASE("xyz round trip is exact, with comments and blank lines accepted") {
  Rng rng(77);
  PointCloud c;
  for (int i = 0; i < 33; ++i) {
    c.points.push_back({rng.normal() * 1e3, rng.normal() * 1e-7, rng.normal()});
    c.source_indices.push_back(i);
  }
  const std::string path = "/tmp/pointseq_test_io.xyz";
  save_xyz(path, c);
  const PointCloud r = load_xyz(path);
  REQUIRE(r.points.size() == c.points.size());
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(r.points[i].x == c.points[i].x);
    CHECK(r.points[i].y == c.points[i].y);
    CHECK(r.points[i].z == c.points[i].z);
  }
  std::remove(path.c_str());

  std::ofstream out(path);
  out << "# a comment\n\n 1.5 2.5 3.5 # trailing comment\n";
  out.close();
  const PointCloud p = load_xyz(path);
  REQUIRE(p.points.size() == 1);
  CHECK(p.points[0].y == 2.5);
  std::remove(path.c_str());
}

TEST_CASE("xyz parse errors carry the line number") {
  const std::string path = "/tmp/pointseq_test_bad.xyz";
  std::ofstream out(path);
  out << "1 2 3\n4 5\n";
  out.close();
  CHECK_THROWS_WITH_AS(load_xyz(path), doctest::Contains(":2:"), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("minimal OFF file: one triangle, samples stay on it") {
  const std::string path = "/tmp/pointseq_test_tri.off";
  std::ofstream out(path);
  out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
  out.close();
  const PointCloud c = load_off(path, 100, 5);
  REQUIRE(c.points.size() == 100);
  for (const Point3& p : c.points) {
    CHECK(p.z == 0.0);  // triangle lies in z = 0
    CHECK(p.x >= -1e-12);
    CHECK(p.y >= -1e-12);
    CHECK(p.x + p.y <= 1.0 + 1e-12);  // barycentric validity
  }
  std::remove(path.c_str());
}

TEST_CASE("OFF header variants and polygon triangulation") {
  const std::string path = "/tmp/pointseq_test_quad.off";
  std::ofstream out(path);
  out << "OFF 4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
  out.close();
  const TriangleMesh mesh = parse_off(path);
  CHECK(mesh.vertices.size() == 4);
  CHECK(mesh.triangles.size() == 2);  // quad fan-triangulates
  std::remove(path.c_str());
}

TEST_CASE("OFF area-weighted sampling: 9:1 triangles get ~9:1 samples") {
  const std::string path = "/tmp/pointseq_test_area.off";
  std::ofstream out(path);
  // right triangles with legs 3 and 1: areas 4.5 and 0.5
  out << "OFF\n6 2 0\n0 0 0\n3 0 0\n0 3 0\n10 0 0\n11 0 0\n10 1 0\n3 0 1 2\n3 3 4 5\n";
  out.close();
  const PointCloud c = load_off(path, 10000, 6);
  int big = 0;
  for (const Point3& p : c.points)
    if (p.x < 5) ++big;
  CHECK(big > 8800);  // 9000 +- 200
  CHECK(big < 9200);
  std::remove(path.c_str());
}

TEST_CASE("OFF parse errors carry the line number") {
  const std::string path = "/tmp/pointseq_test_badoff.off";
  {
    std::ofstream out(path);
    out << "PFF\n3 1 0\n";
  }
  CHECK_THROWS_AS(parse_off(path), ParseError);
  {
    std::ofstream out(path);
    out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n";
  }
  CHECK_THROWS_WITH_AS(parse_off(path), doctest::Contains(":6:"), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("dataset directory layout loads with sorted class names") {
  namespace fs = std::filesystem;
  const fs::path root = "/tmp/pointseq_test_ds";
  fs::remove_all(root);
  for (const std::string cls : {"box", "ball"}) {
    fs::create_directories(root / cls / "train");
    fs::create_directories(root / cls / "test");
    for (int i = 0; i < 2; ++i) {
      save_xyz((root / cls / "train" / ("t" + std::to_string(i) + ".xyz")).string(),
               gen_shape(cls == "box" ? ShapeKind::Cube : ShapeKind::Sphere, 32, i));
    }
    save_xyz((root / cls / "test" / "e0.xyz").string(),
             gen_shape(cls == "box" ? ShapeKind::Cube : ShapeKind::Sphere, 32, 9));
  }
  const LabeledDataset train = load_dataset_dir(root.string(), "train", 32, 0);
  const LabeledDataset test = load_dataset_dir(root.string(), "test", 32, 0);
  CHECK(train.items.size() == 4);
  CHECK(test.items.size() == 2);
  REQUIRE(train.class_names.size() == 2);
  CHECK(train.class_names[0] == "ball");  // sorted
  CHECK(train.class_names[1] == "box");
  fs::remove_all(root);
}
