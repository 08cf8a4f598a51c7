#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pointseq {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double sq_dist(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

// Ordered list of 3D points. source_indices track provenance into the
// originally loaded cloud and survive subsampling.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<std::int64_t> source_indices;

  std::size_t size() const { return points.size(); }

  static PointCloud from_points(std::vector<Point3> pts) {
    PointCloud c;
    c.source_indices.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) c.source_indices[i] = static_cast<std::int64_t>(i);
    c.points = std::move(pts);
    return c;
  }
};

// FPS centers plus per-center kNN patches. Patch coordinates are stored
// relative to their center; patch_indices index into the source cloud.
struct PatchSet {
  std::vector<Point3> centers;
  std::vector<std::int64_t> center_indices;
  int n_p = 0;
  std::vector<std::vector<Point3>> patches;
  std::vector<std::vector<std::int64_t>> patch_indices;

  int n_c() const { return static_cast<int>(centers.size()); }
};

// batch x len x width array of doubles, row-major.
struct SequenceBatch {
  int batch = 0, len = 0, width = 0;
  std::vector<double> data;

  SequenceBatch() = default;
  SequenceBatch(int b, int n, int d) : batch(b), len(n), width(d), data(static_cast<std::size_t>(b) * n * d, 0.0) {}

  double& at(int b, int i, int c) { return data[(static_cast<std::size_t>(b) * len + i) * width + c]; }
  double at(int b, int i, int c) const { return data[(static_cast<std::size_t>(b) * len + i) * width + c]; }
  double* row(int b, int i) { return data.data() + (static_cast<std::size_t>(b) * len + i) * width; }
  const double* row(int b, int i) const { return data.data() + (static_cast<std::size_t>(b) * len + i) * width; }
};

}  // namespace pointseq
