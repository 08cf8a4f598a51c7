#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointseq/types.hpp"

namespace pointseq {

enum class ShapeKind { Sphere, Cube, Cylinder, Torus, Cone, Plane };

std::string to_string(ShapeKind k);
ShapeKind shape_from_string(const std::string& s);
constexpr int kShapeKindCount = 6;

struct ShapeParams {
  double radius = 1.0;       // sphere/cylinder/cone/torus major radius
  double minor_radius = 0.3; // torus tube radius
  double height = 1.5;       // cylinder/cone
  double extent = 1.0;       // cube half-extent / plane half-size
};

// Uniform surface samples in the shape's canonical pose, not normalized.
std::vector<Point3> sample_shape_surface(ShapeKind kind, const ShapeParams& params, int n_points,
                                         std::uint64_t seed);

// Surface samples, normalized (centroid at origin, max norm 1).
PointCloud gen_shape(ShapeKind kind, int n_points, std::uint64_t seed,
                     const ShapeParams& params = ShapeParams{});

struct LabeledItem {
  PointCloud cloud;
  int label = 0;
  std::uint64_t item_id = 0;
};

struct LabeledDataset {
  std::vector<LabeledItem> items;
  std::vector<std::string> class_names;
  std::string split;  // "train" / "test" / ""
};

struct DatasetSpec {
  int classes = 4;
  int per_class = 50;
  int n_points = 256;
  bool random_pose = false;
  bool vary_params = true;  // jitter the generation parameters per item
};

struct DatasetSplits {
  LabeledDataset train;
  LabeledDataset test;
};

// Balanced synthetic dataset, deterministic 80/20 split by seeded shuffle.
DatasetSplits make_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace pointseq
