#include "pointseq/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pointseq/rng.hpp"

namespace pointseq {

PointCloud normalize(const PointCloud& cloud) {
  const std::size_t n = cloud.points.size();
  if (n == 0) throw std::invalid_argument("empty input");

  double cx = 0.0, cy = 0.0, cz = 0.0;
  for (const Point3& p : cloud.points) {
    if (!p.finite()) throw std::invalid_argument("non-finite coordinate");
    cx += p.x;
    cy += p.y;
    cz += p.z;
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  cz /= static_cast<double>(n);

  PointCloud out;
  out.points.resize(n);
  out.source_indices = cloud.source_indices;

  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 q{cloud.points[i].x - cx, cloud.points[i].y - cy, cloud.points[i].z - cz};
    out.points[i] = q;
    max_norm = std::max(max_norm, norm(q));
  }
  if (max_norm > 0.0) {
    const double inv = 1.0 / max_norm;
    for (Point3& q : out.points) q = q * inv;
  }
  return out;
}

namespace {

// Argmax of (value, -index): larger distance wins, ties go to the lower index.
struct Best {
  double d2 = -1.0;
  std::int64_t idx = -1;
};

inline Best better(const Best& a, const Best& b) {
  if (a.d2 > b.d2) return a;
  if (b.d2 > a.d2) return b;
  return a.idx <= b.idx ? a : b;
}

}  // namespace

FpsResult farthest_point_sampling(const PointCloud& cloud, int n_c, FpsStart start) {
  const std::int64_t n = static_cast<std::int64_t>(cloud.points.size());
  if (n == 0) throw std::invalid_argument("empty input");
  if (n_c <= 0) throw std::invalid_argument("sample count must be positive");
  if (n_c > n) throw std::invalid_argument("sample larger than population");

  std::int64_t first = start.index;
  if (start.kind == FpsStart::Kind::RandomSeeded) {
    Rng rng(start.seed);
    first = rng.uniform_int(0, n - 1);
  }
  if (first < 0 || first >= n) throw std::invalid_argument("start index out of range");

  FpsResult res;
  res.center_indices.reserve(n_c);
  res.centers.reserve(n_c);

  // min squared distance from each point to the selected set; selected
  // points are excluded from candidacy so duplicate positions cannot be
  // re-picked (n_c = N must enumerate every index once)
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> selected(n, 0);
  std::int64_t cur = first;
  selected[cur] = 1;
  res.center_indices.push_back(cur);
  res.centers.push_back(cloud.points[cur]);

  const Point3* pts = cloud.points.data();
  for (int step = 1; step < n_c; ++step) {
    const Point3 c = pts[cur];
    Best global;
#pragma omp parallel
    {
      Best local;
#pragma omp for nowait
      for (std::int64_t i = 0; i < n; ++i) {
        const double d2 = sq_dist(pts[i], c);
        if (d2 < min_d2[i]) min_d2[i] = d2;
        if (!selected[i]) local = better(local, Best{min_d2[i], i});
      }
#pragma omp critical
      global = better(global, local);
    }
    cur = global.idx;
    selected[cur] = 1;
    res.center_indices.push_back(cur);
    res.centers.push_back(pts[cur]);
  }
  return res;
}

PatchSet knn_group(const PointCloud& cloud, const std::vector<Point3>& centers,
                   const std::vector<std::int64_t>& center_indices, int n_p) {
  const std::int64_t n = static_cast<std::int64_t>(cloud.points.size());
  if (n == 0) throw std::invalid_argument("empty input");
  if (n_p <= 0) throw std::invalid_argument("patch size must be positive");
  if (static_cast<std::int64_t>(n_p) > n) throw std::invalid_argument("patch size larger than population");
  if (centers.size() != center_indices.size()) throw std::invalid_argument("centers/indices size mismatch");

  const int n_c = static_cast<int>(centers.size());
  PatchSet ps;
  ps.centers = centers;
  ps.center_indices = center_indices;
  ps.n_p = n_p;
  ps.patches.resize(n_c);
  ps.patch_indices.resize(n_c);

#pragma omp parallel for schedule(static)
  for (int j = 0; j < n_c; ++j) {
    const Point3 c = centers[j];
    std::vector<std::pair<double, std::int64_t>> cand(n);
    for (std::int64_t i = 0; i < n; ++i) cand[i] = {sq_dist(cloud.points[i], c), i};
    std::partial_sort(cand.begin(), cand.begin() + n_p, cand.end());

    auto& patch = ps.patches[j];
    auto& idx = ps.patch_indices[j];
    patch.resize(n_p);
    idx.resize(n_p);
    for (int k = 0; k < n_p; ++k) {
      const std::int64_t src = cand[k].second;
      patch[k] = cloud.points[src] - c;
      idx[k] = cloud.source_indices.empty() ? src : cloud.source_indices[src];
    }
  }
  return ps;
}

}  // namespace pointseq
