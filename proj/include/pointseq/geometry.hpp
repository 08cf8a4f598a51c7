#pragma once

#include <cstdint>
#include <vector>

#include "pointseq/types.hpp"

namespace pointseq {

// Seed rule for farthest point sampling.
struct FpsStart {
  enum class Kind { FixedIndex, RandomSeeded } kind = Kind::FixedIndex;
  std::int64_t index = 0;
  std::uint64_t seed = 0;

  static FpsStart fixed(std::int64_t i) { return {Kind::FixedIndex, i, 0}; }
  static FpsStart random(std::uint64_t s) { return {Kind::RandomSeeded, 0, s}; }
};

struct FpsResult {
  std::vector<Point3> centers;
  std::vector<std::int64_t> center_indices;  // indices into the input cloud
};

// Centroid-centering followed by scaling so the maximum point norm is 1.
// An all-coincident cloud maps to all zeros. source_indices pass through.
PointCloud normalize(const PointCloud& cloud);

// Greedy max-min sampling of n_c points. Deterministic: ties break toward
// the lower index. The inner candidate scan is OpenMP-parallel; the result
// is identical for any thread count.
FpsResult farthest_point_sampling(const PointCloud& cloud, int n_c, FpsStart start = FpsStart::fixed(0));

// For each center, the n_p nearest cloud points (squared Euclidean distance,
// ties toward the lower index), re-expressed relative to the center.
PatchSet knn_group(const PointCloud& cloud, const std::vector<Point3>& centers,
                   const std::vector<std::int64_t>& center_indices, int n_p);

inline PatchSet knn_group(const PointCloud& cloud, const FpsResult& fps, int n_p) {
  return knn_group(cloud, fps.centers, fps.center_indices, n_p);
}

}  // namespace pointseq
