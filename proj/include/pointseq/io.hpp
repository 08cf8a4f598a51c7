#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "pointseq/datagen.hpp"
#include "pointseq/types.hpp"

namespace pointseq {

// XYZ text format: one "x y z" line per point, printed with 17 significant
// digits so save/load round-trips doubles exactly. '#' starts a comment.
PointCloud load_xyz(const std::string& path);
void save_xyz(const std::string& path, const PointCloud& cloud);

// OFF mesh: parse header/vertices/faces (polygons are fan-triangulated) and
// sample n_points uniformly by triangle area.
PointCloud load_off(const std::string& path, int n_points, std::uint64_t seed);

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<int, 3>> triangles;
};
TriangleMesh parse_off(const std::string& path);
PointCloud sample_mesh(const TriangleMesh& mesh, int n_points, std::uint64_t seed);

// Loads either .xyz or .off (sampled to n_points) based on the extension.
PointCloud load_cloud(const std::string& path, int n_points, std::uint64_t seed);

// Dataset directory layout: <root>/<class_name>/<split>/<item>.{off,xyz}
LabeledDataset load_dataset_dir(const std::string& root, const std::string& split, int n_points,
                                std::uint64_t seed);

// Thrown on malformed files; carries the 1-based line number when known.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pointseq
