#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pointseq/geometry.hpp"
#include "pointseq/perturb.hpp"
#include "pointseq/reference.hpp"
#include "pointseq/rng.hpp"

using namespace pointseq;

namespace {

PointCloud make_cloud(std::initializer_list<Point3> pts) {
  return PointCloud::from_points(std::vector<Point3>(pts));
}

PointCloud random_cloud(int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
  return PointCloud::from_points(std::move(pts));
}

PointCloud translated_rotated(const PointCloud& c, std::uint64_t seed) {
  PointCloud out = apply_rotation(c, random_rotation(seed));
  for (Point3& p : out.points) p = p + Point3{1.5, -0.25, 3.0};
  return out;
}

}  // namespace

TEST_CASE("normalize centers and scales a two-point cloud") {
  const PointCloud out = normalize(make_cloud({{2, 0, 0}, {0, 0, 0}}));
  CHECK(out.points[0].x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.points[1].x == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.points[0].y == 0.0);
  CHECK(out.source_indices == std::vector<std::int64_t>{0, 1});
}

TEST_CASE("normalize maps an all-coincident cloud to zeros") {
  const PointCloud out = normalize(make_cloud({{5, 5, 5}}));
  CHECK(out.points[0].x == 0.0);
  CHECK(out.points[0].y == 0.0);
  CHECK(out.points[0].z == 0.0);
}

TEST_CASE("normalize rejects empty and non-finite input") {
  CHECK_THROWS_WITH_AS(normalize(PointCloud{}), "empty input", std::invalid_argument);
  PointCloud bad = make_cloud({{0, 0, 0}, {1, std::nan(""), 0}});
  CHECK_THROWS_AS(normalize(bad), std::invalid_argument);
}

TEST_CASE("normalize postconditions on random clouds") {
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    const PointCloud out = normalize(random_cloud(100, seed, 4.0));
    double cx = 0, cy = 0, cz = 0, mx = 0;
    for (const Point3& p : out.points) {
      cx += p.x;
      cy += p.y;
      cz += p.z;
      mx = std::max(mx, norm(p));
    }
    CHECK(std::abs(cx / 100) < 1e-9);
    CHECK(std::abs(cy / 100) < 1e-9);
    CHECK(std::abs(cz / 100) < 1e-9);
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-12));

    const PointCloud twice = normalize(out);
    for (std::size_t i = 0; i < out.points.size(); ++i)
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs(twice.points[i][k] - out.points[i][k]) < 1e-12);
  }
}

TEST_CASE("fps picks the farthest point on a line") {
  const PointCloud c = make_cloud({{0, 0, 0}, {1, 0, 0}, {0.4, 0, 0}});
  const FpsResult r = farthest_point_sampling(c, 2);
  CHECK(r.center_indices == std::vector<std::int64_t>{0, 1});
}

TEST_CASE("fps with n_c = N enumerates all indices") {
  const PointCloud c = random_cloud(17, 5);
  const FpsResult r = farthest_point_sampling(c, 17);
  std::vector<std::int64_t> sorted = r.center_indices;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 17; ++i) CHECK(sorted[i] == i);
  CHECK(r.center_indices[0] == 0);
}

TEST_CASE("fps errors") {
  const PointCloud c = random_cloud(4, 9);
  CHECK_THROWS_WITH_AS(farthest_point_sampling(c, 5), "sample larger than population",
                       std::invalid_argument);
  CHECK_THROWS_AS(farthest_point_sampling(c, 0), std::invalid_argument);
}

TEST_CASE("fps matches the brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const PointCloud c = random_cloud(64, 100 + seed);
    const FpsResult fast = farthest_point_sampling(c, 8);
    const FpsResult slow = reference::fps_bruteforce(c, 8);
    CHECK(fast.center_indices == slow.center_indices);
  }
  // larger instance, more centers
  const PointCloud c = random_cloud(256, 77);
  CHECK(farthest_point_sampling(c, 40).center_indices ==
        reference::fps_bruteforce(c, 40).center_indices);
}

TEST_CASE("fps determinism and random-start rule") {
  const PointCloud c = random_cloud(50, 4);
  const FpsResult a = farthest_point_sampling(c, 10);
  const FpsResult b = farthest_point_sampling(c, 10);
  CHECK(a.center_indices == b.center_indices);

  const FpsResult r1 = farthest_point_sampling(c, 10, FpsStart::random(42));
  const FpsResult r2 = farthest_point_sampling(c, 10, FpsStart::random(42));
  CHECK(r1.center_indices == r2.center_indices);
  CHECK(farthest_point_sampling(c, 3, FpsStart::fixed(7)).center_indices[0] == 7);
}

TEST_CASE("fps selected index set is isometry equivariant") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PointCloud c = random_cloud(80, 200 + seed);
    const PointCloud moved = translated_rotated(c, 300 + seed);
    CHECK(farthest_point_sampling(c, 12).center_indices ==
          farthest_point_sampling(moved, 12).center_indices);
  }
}

TEST_CASE("knn_group nearest two on a line, center-relative coords") {
  const PointCloud c = make_cloud({{0, 0, 0}, {1, 0, 0}, {3, 0, 0}});
  const PatchSet ps = knn_group(c, {Point3{0, 0, 0}}, {0}, 2);
  CHECK(ps.patch_indices[0] == std::vector<std::int64_t>{0, 1});
  CHECK(ps.patches[0][0].x == 0.0);
  CHECK(ps.patches[0][1].x == 1.0);
}

TEST_CASE("knn_group with n_p = N returns the whole cloud per patch") {
  const PointCloud c = random_cloud(12, 8);
  const FpsResult fps = farthest_point_sampling(c, 3);
  const PatchSet ps = knn_group(c, fps, 12);
  for (const auto& idx : ps.patch_indices) {
    std::vector<std::int64_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 12; ++i) CHECK(sorted[i] == i);
  }
}

TEST_CASE("knn_group errors when n_p exceeds the cloud") {
  const PointCloud c = random_cloud(4, 3);
  CHECK_THROWS_AS(knn_group(c, {Point3{0, 0, 0}}, {0}, 5), std::invalid_argument);
}

TEST_CASE("knn_group matches the exhaustive sort oracle") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const PointCloud c = random_cloud(128, 400 + seed);
    const FpsResult fps = farthest_point_sampling(c, 16);
    const PatchSet fast = knn_group(c, fps, 8);
    const PatchSet slow = reference::knn_fullsort(c, fps.centers, fps.center_indices, 8);
    CHECK(fast.patch_indices == slow.patch_indices);
    for (int j = 0; j < fast.n_c(); ++j)
      for (int k = 0; k < 8; ++k) {
        CHECK(fast.patches[j][k].x == slow.patches[j][k].x);
        CHECK(fast.patches[j][k].y == slow.patches[j][k].y);
        CHECK(fast.patches[j][k].z == slow.patches[j][k].z);
      }
  }
}

TEST_CASE("knn_group patch index structure is isometry equivariant") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PointCloud c = random_cloud(96, 500 + seed);
    const PointCloud moved = translated_rotated(c, 600 + seed);
    const FpsResult f1 = farthest_point_sampling(c, 10);
    const FpsResult f2 = farthest_point_sampling(moved, 10);
    CHECK(knn_group(c, f1, 7).patch_indices == knn_group(moved, f2, 7).patch_indices);
  }
}

TEST_CASE("knn ties break toward the lower index") {
  // points 0 and 1 are equidistant from the center; the lower index must win
  const PointCloud c = make_cloud({{1, 0, 0}, {-1, 0, 0}, {0, 0, 0}, {5, 5, 5}});
  const PatchSet ps = knn_group(c, {Point3{0, 0, 0}}, {2}, 2);
  CHECK(ps.patch_indices[0] == std::vector<std::int64_t>{2, 0});
}
