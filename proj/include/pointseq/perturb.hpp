#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "pointseq/types.hpp"

namespace pointseq {

enum class PerturbKind { None, Rotation, RHF, Jitter, RID, All };

std::string to_string(PerturbKind k);
PerturbKind perturb_from_string(const std::string& s);

enum class ApplyTo { Train, Test, Both };
std::string to_string(ApplyTo a);
ApplyTo apply_to_from_string(const std::string& s);

struct PerturbSpec {
  PerturbKind kind = PerturbKind::None;
  ApplyTo apply_to = ApplyTo::Both;
  std::uint64_t seed = 0;
  double sigma = 0.01;   // jitter std
  double clip = 0.05;    // jitter clamp
  double p = 0.3;        // dropout probability
  double flip_prob = 0.5;

  void validate() const;
};

using Mat3 = std::array<double, 9>;  // row-major rotation matrix

// Uniform rotation over SO(3) (Shoemake's uniform-quaternion construction).
Mat3 random_rotation(std::uint64_t seed);
Mat3 rotation_about_axis(int axis, double angle_rad);
PointCloud apply_rotation(const PointCloud& cloud, const Mat3& R);
PointCloud rotate(const PointCloud& cloud, std::uint64_t seed);

// With probability prob, negate x (the horizontal axis) for every point.
PointCloud flip_horizontal(const PointCloud& cloud, double prob, std::uint64_t seed);

// Per-coordinate Gaussian noise, each component clamped to [-clip, clip].
PointCloud jitter(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed);

// Independent removal with probability p; at least one point survives.
PointCloud dropout_points(const PointCloud& cloud, double p, std::uint64_t seed);

// Dispatch on spec.kind; All composes rotation, flip, jitter, dropout.
PointCloud apply_perturb(const PointCloud& cloud, const PerturbSpec& spec, std::uint64_t seed);

}  // namespace pointseq
