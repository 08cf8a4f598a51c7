#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pointseq/geometry.hpp"
#include "pointseq/perturb.hpp"
#include "pointseq/reference.hpp"
#include "pointseq/rng.hpp"
#include "pointseq/serialize.hpp"

using namespace pointseq;

namespace {

std::vector<Point3> random_centers(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {rng.normal(), rng.normal(), rng.normal()};
  PointCloud c = normalize(PointCloud::from_points(std::move(pts)));
  return c.points;
}

bool is_permutation_of_iota(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  for (int i = 0; i < static_cast<int>(v.size()); ++i)
    if (v[i] != i) return false;
  return true;
}

}  // namespace

TEST_CASE("sort_axis on y") {
  const std::vector<Point3> centers{{0, 1, 0}, {0, 0, 0}};
  CHECK(sort_axis(centers, Axis::Y).order == std::vector<int>{1, 0});
}

TEST_CASE("sort_axis on equal centers is the identity (stable)") {
  const std::vector<Point3> centers(5, Point3{0.5, 0.5, 0.5});
  CHECK(sort_axis(centers, Axis::X).order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("sort_axis matches an independent stable sort") {
  const auto centers = random_centers(32, 17);
  const auto got = sort_axis(centers, Axis::X).order;
  std::vector<int> want(32);
  std::iota(want.begin(), want.end(), 0);
  std::stable_sort(want.begin(), want.end(), [&](int a, int b) { return centers[a].x < centers[b].x; });
  CHECK(got == want);
}

TEST_CASE("axis_triple concatenates the three axis sorts") {
  const std::vector<Point3> centers{{0, 0, 1}, {1, 1, 0}};
  const Serialization s = axis_triple(centers);
  CHECK(s.order == std::vector<int>{0, 1, 0, 1, 1, 0});
  CHECK(s.replication == 3);
}

TEST_CASE("axis_triple of a single center") {
  const Serialization s = axis_triple({Point3{0.3, 0.2, 0.1}});
  CHECK(s.order == std::vector<int>{0, 0, 0});
}

TEST_CASE("axis_triple structural: length 3n, every index three times") {
  const auto centers = random_centers(64, 3);
  const Serialization s = axis_triple(centers);
  CHECK(s.order.size() == 192);
  std::vector<int> count(64, 0);
  for (int i : s.order) count[i]++;
  for (int c : count) CHECK(c == 3);
}

TEST_CASE("nimba keeps a chain whose gaps are below r") {
  const std::vector<Point3> centers{{0, 0, 0}, {0, 0.5, 0}, {0, 1, 0}};
  CHECK(nimba_reorder(centers, 0.8).order == std::vector<int>{0, 1, 2});
}

TEST_CASE("nimba pulls forward the first in-range center") {
  // y-sorted: P0=(0,0,0), P1=(2,0.5,0), P2=(0,0.6,0); gap(P0,P1) >= 0.8,
  // P2 sits within 0.6 of P0 and is moved between them
  const std::vector<Point3> centers{{0, 0, 0}, {2, 0.5, 0}, {0, 0.6, 0}};
  CHECK(nimba_reorder(centers, 0.8).order == std::vector<int>{0, 2, 1});
}

TEST_CASE("nimba degenerate thresholds reduce to the y-sort") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto centers = random_centers(24, 1000 + seed);
    const auto ysorted = sort_axis(centers, Axis::Y).order;
    CHECK(nimba_reorder(centers, 0.0).order == ysorted);
    CHECK(nimba_reorder(centers, 2.0 * std::sqrt(3.0)).order == ysorted);
    CHECK(nimba_reorder(centers, 2.0).order == ysorted);  // normalized diameter bound
  }
}

TEST_CASE("nimba rejects negative thresholds") {
  CHECK_THROWS_AS(nimba_reorder({Point3{0, 0, 0}}, -0.1), std::invalid_argument);
}

TEST_CASE("nimba output is a permutation and replays exactly") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int n = 2 + static_cast<int>(mix_seed(seed, 1) % 63);
    const auto centers = random_centers(n, 2000 + seed);
    const Serialization s = nimba_reorder(centers, 0.8);
    CHECK(is_permutation_of_iota(s.order));
    CHECK(s.order == reference::nimba_replay(centers, 0.8).order);
  }
}

TEST_CASE("nimba nearest-candidate variant picks the closest in-range center") {
  // P0 at origin; gap to next y-neighbor is large; two later candidates are
  // in range, the second one closer
  const std::vector<Point3> centers{{0, 0, 0}, {2, 0.1, 0}, {0.7, 0.2, 0}, {0.1, 0.3, 0}};
  const Serialization first = nimba_reorder(centers, 0.8, NimbaCandidate::First);
  const Serialization nearest = nimba_reorder(centers, 0.8, NimbaCandidate::Nearest);
  CHECK(first.order[1] == 2);
  CHECK(nearest.order[1] == 3);
  CHECK(nearest.order == reference::nimba_replay(centers, 0.8, NimbaCandidate::Nearest).order);
}

TEST_CASE("nimba determinism across repeated calls and thread settings") {
  const auto centers = random_centers(48, 31);
  const auto a = nimba_reorder(centers, 0.8).order;
  const auto b = nimba_reorder(centers, 0.8).order;
  CHECK(a == b);
}

TEST_CASE("nimba order is stable under translation and y-axis rotation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto centers = random_centers(20, 4000 + seed);
    const auto base = nimba_reorder(centers, 0.8).order;

    std::vector<Point3> shifted(centers);
    for (Point3& p : shifted) p = p + Point3{2.0, -5.0, 0.75};
    CHECK(nimba_reorder(shifted, 0.8).order == base);

    const Mat3 R = rotation_about_axis(1, 0.3 + 0.2 * seed);
    std::vector<Point3> rotated(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const Point3& p = centers[i];
      rotated[i] = {R[0] * p.x + R[1] * p.y + R[2] * p.z, R[3] * p.x + R[4] * p.y + R[5] * p.z,
                    R[6] * p.x + R[7] * p.y + R[8] * p.z};
    }
    CHECK(nimba_reorder(rotated, 0.8).order == base);
  }
}

TEST_CASE("nimba chain property: adjacent gaps below r unless no candidate existed") {
  // replay the greedy pass; at every position either the output gap is < r,
  // or the replay proves no unvisited later element was within r
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto centers = random_centers(32, 5000 + seed);
    const double r = 0.8, r2 = r * r;
    const auto ord = nimba_reorder(centers, r).order;
    for (std::size_t i = 0; i + 1 < ord.size(); ++i) {
      if (sq_dist(centers[ord[i]], centers[ord[i + 1]]) < r2) continue;
      for (std::size_t j = i + 2; j < ord.size(); ++j)
        CHECK(sq_dist(centers[ord[i]], centers[ord[j]]) >= r2);
    }
  }
}

TEST_CASE("apply_order basics") {
  SequenceBatch tokens(1, 2, 1);
  tokens.at(0, 0, 0) = 10.0;
  tokens.at(0, 1, 0) = 20.0;

  Serialization ident = identity_order(2);
  const SequenceBatch same = apply_order(tokens, ident);
  CHECK(same.at(0, 0, 0) == 10.0);
  CHECK(same.at(0, 1, 0) == 20.0);

  Serialization swap;
  swap.order = {1, 0};
  const SequenceBatch rev = apply_order(tokens, swap);
  CHECK(rev.at(0, 0, 0) == 20.0);
  CHECK(rev.at(0, 1, 0) == 10.0);

  Serialization bad;
  bad.order = {0, 5};
  CHECK_THROWS_AS(apply_order(tokens, bad), std::out_of_range);
}

TEST_CASE("apply_order with axis_triple replicates tokens three times") {
  const auto centers = random_centers(4, 77);
  const Serialization s = axis_triple(centers);
  SequenceBatch tokens(1, 4, 2);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 2; ++c) tokens.at(0, i, c) = 10.0 * i + c;
  const SequenceBatch out = apply_order(tokens, s);
  CHECK(out.len == 12);
  std::vector<int> seen(4, 0);
  for (int i = 0; i < 12; ++i) {
    const int src = static_cast<int>(out.at(0, i, 0) / 10.0);
    CHECK(out.at(0, i, 1) == doctest::Approx(10.0 * src + 1));
    seen[src]++;
  }
  for (int c : seen) CHECK(c == 3);
}

TEST_CASE("ordering strategy names round-trip") {
  for (OrderingStrategy s : {OrderingStrategy::YSort, OrderingStrategy::AxisTriple,
                             OrderingStrategy::NimbaProximity, OrderingStrategy::Identity})
    CHECK(ordering_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(ordering_from_string("zigzag"), std::invalid_argument);
}
