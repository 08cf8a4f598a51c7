#include "pointseq/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pointseq/rng.hpp"

namespace pointseq {

std::string to_string(PerturbKind k) {
  switch (k) {
    case PerturbKind::None: return "none";
    case PerturbKind::Rotation: return "rotation";
    case PerturbKind::RHF: return "rhf";
    case PerturbKind::Jitter: return "jitter";
    case PerturbKind::RID: return "rid";
    case PerturbKind::All: return "all";
  }
  return "?";
}

PerturbKind perturb_from_string(const std::string& s) {
  if (s == "none") return PerturbKind::None;
  if (s == "rotation") return PerturbKind::Rotation;
  if (s == "rhf") return PerturbKind::RHF;
  if (s == "jitter") return PerturbKind::Jitter;
  if (s == "rid") return PerturbKind::RID;
  if (s == "all") return PerturbKind::All;
  throw std::invalid_argument("unknown perturbation: " + s);
}

std::string to_string(ApplyTo a) {
  switch (a) {
    case ApplyTo::Train: return "train";
    case ApplyTo::Test: return "test";
    case ApplyTo::Both: return "both";
  }
  return "?";
}

ApplyTo apply_to_from_string(const std::string& s) {
  if (s == "train") return ApplyTo::Train;
  if (s == "test") return ApplyTo::Test;
  if (s == "both") return ApplyTo::Both;
  throw std::invalid_argument("unknown apply-to: " + s);
}

void PerturbSpec::validate() const {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  if (!(clip >= 0.0)) throw std::invalid_argument("clip must be nonnegative");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw std::invalid_argument("flip prob must be in [0, 1]");
}

Mat3 random_rotation(std::uint64_t seed) {
  Rng rng(seed);
  // Shoemake: three uniforms -> uniform unit quaternion
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double s1 = std::sqrt(1.0 - u1), s2 = std::sqrt(u1);
  const double qx = s1 * std::sin(2.0 * M_PI * u2);
  const double qy = s1 * std::cos(2.0 * M_PI * u2);
  const double qz = s2 * std::sin(2.0 * M_PI * u3);
  const double qw = s2 * std::cos(2.0 * M_PI * u3);
  Mat3 R;
  R[0] = 1 - 2 * (qy * qy + qz * qz);
  R[1] = 2 * (qx * qy - qz * qw);
  R[2] = 2 * (qx * qz + qy * qw);
  R[3] = 2 * (qx * qy + qz * qw);
  R[4] = 1 - 2 * (qx * qx + qz * qz);
  R[5] = 2 * (qy * qz - qx * qw);
  R[6] = 2 * (qx * qz - qy * qw);
  R[7] = 2 * (qy * qz + qx * qw);
  R[8] = 1 - 2 * (qx * qx + qy * qy);
  return R;
}

Mat3 rotation_about_axis(int axis, double a) {
  const double c = std::cos(a), s = std::sin(a);
  switch (axis) {
    case 0: return {1, 0, 0, 0, c, -s, 0, s, c};
    case 1: return {c, 0, s, 0, 1, 0, -s, 0, c};
    case 2: return {c, -s, 0, s, c, 0, 0, 0, 1};
  }
  throw std::invalid_argument("axis must be 0, 1 or 2");
}

PointCloud apply_rotation(const PointCloud& cloud, const Mat3& R) {
  PointCloud out;
  out.source_indices = cloud.source_indices;
  out.points.resize(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Point3& p = cloud.points[i];
    out.points[i] = {R[0] * p.x + R[1] * p.y + R[2] * p.z, R[3] * p.x + R[4] * p.y + R[5] * p.z,
                     R[6] * p.x + R[7] * p.y + R[8] * p.z};
  }
  return out;
}

PointCloud rotate(const PointCloud& cloud, std::uint64_t seed) {
  return apply_rotation(cloud, random_rotation(seed));
}

PointCloud flip_horizontal(const PointCloud& cloud, double prob, std::uint64_t seed) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("flip prob must be in [0, 1]");
  Rng rng(seed);
  if (!rng.bernoulli(prob)) return cloud;
  PointCloud out = cloud;
  for (Point3& p : out.points) p.x = -p.x;
  return out;
}

PointCloud jitter(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !(clip >= 0.0)) throw std::invalid_argument("sigma/clip must be nonnegative");
  Rng rng(seed);
  PointCloud out = cloud;
  for (Point3& p : out.points) {
    for (int c = 0; c < 3; ++c) {
      const double noise = std::clamp(sigma * rng.normal(), -clip, clip);
      p[c] += noise;
    }
  }
  return out;
}

PointCloud dropout_points(const PointCloud& cloud, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (cloud.points.empty()) throw std::invalid_argument("empty input");
  Rng rng(seed);
  PointCloud out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const bool drop = rng.bernoulli(p);
    if (!drop) {
      out.points.push_back(cloud.points[i]);
      out.source_indices.push_back(cloud.source_indices.empty() ? static_cast<std::int64_t>(i)
                                                                : cloud.source_indices[i]);
    }
  }
  if (out.points.empty()) {
    const std::int64_t keep = rng.uniform_int(0, static_cast<std::int64_t>(cloud.points.size()) - 1);
    out.points.push_back(cloud.points[keep]);
    out.source_indices.push_back(cloud.source_indices.empty() ? keep : cloud.source_indices[keep]);
  }
  return out;
}

PointCloud apply_perturb(const PointCloud& cloud, const PerturbSpec& spec, std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case PerturbKind::None: return cloud;
    case PerturbKind::Rotation: return rotate(cloud, seed);
    case PerturbKind::RHF: return flip_horizontal(cloud, spec.flip_prob, seed);
    case PerturbKind::Jitter: return jitter(cloud, spec.sigma, spec.clip, seed);
    case PerturbKind::RID: return dropout_points(cloud, spec.p, seed);
    case PerturbKind::All: {
      PointCloud c = rotate(cloud, mix_seed(seed, 1));
      c = flip_horizontal(c, spec.flip_prob, mix_seed(seed, 2));
      c = jitter(c, spec.sigma, spec.clip, mix_seed(seed, 3));
      return dropout_points(c, spec.p, mix_seed(seed, 4));
    }
  }
  throw std::invalid_argument("unknown perturbation kind");
}

}  // namespace pointseq
