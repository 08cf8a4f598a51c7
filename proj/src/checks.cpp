#include "pointseq/checks.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "pointseq/datagen.hpp"
#include "pointseq/geometry.hpp"
#include "pointseq/io.hpp"
#include "pointseq/nn.hpp"
#include "pointseq/perturb.hpp"
#include "pointseq/reference.hpp"
#include "pointseq/rng.hpp"
#include "pointseq/serialize.hpp"
#include "pointseq/ssm.hpp"
#include "pointseq/train.hpp"

namespace pointseq {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

PointCloud random_cloud(int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  PointCloud c;
  c.points.resize(n);
  c.source_indices.resize(n);
  for (int i = 0; i < n; ++i) {
    c.points[i] = {scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
    c.source_indices[i] = i;
  }
  return c;
}

std::vector<Point3> random_centers(int n, std::uint64_t seed) {
  // normalized-cloud centers, matching the precondition of the reorder ops
  const PointCloud c = normalize(random_cloud(n, seed));
  return c.points;
}

SequenceBatch random_seq(int batch, int len, int width, std::uint64_t seed) {
  Rng rng(seed);
  SequenceBatch X(batch, len, width);
  for (double& v : X.data) v = rng.normal();
  return X;
}

bool is_permutation_of_iota(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  for (int i = 0; i < static_cast<int>(v.size()); ++i)
    if (v[i] != i) return false;
  return true;
}

}  // namespace

std::vector<CheckResult> run_invariant_suite(const CheckOptions& opt) {
  std::vector<CheckResult> out;
  const std::uint64_t seed = opt.seed;
  const int trials = opt.quick ? 5 : 25;

  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    out.push_back(CheckResult{name, pass, detail});
  };

  // --- geometry ---
  {
    double worst_centroid = 0.0, worst_norm = 0.0, worst_idem = 0.0;
    for (int t = 0; t < trials; ++t) {
      const PointCloud c = normalize(random_cloud(100, mix_seed(seed, 0x10, t), 3.0));
      double cx = 0, cy = 0, cz = 0, mx = 0;
      for (const Point3& p : c.points) {
        cx += p.x;
        cy += p.y;
        cz += p.z;
        mx = std::max(mx, norm(p));
      }
      const double n = static_cast<double>(c.points.size());
      worst_centroid = std::max({worst_centroid, std::abs(cx / n), std::abs(cy / n), std::abs(cz / n)});
      worst_norm = std::max(worst_norm, std::abs(mx - 1.0));
      const PointCloud c2 = normalize(c);
      for (std::size_t i = 0; i < c.points.size(); ++i)
        for (int k = 0; k < 3; ++k)
          worst_idem = std::max(worst_idem, std::abs(c2.points[i][k] - c.points[i][k]));
    }
    add("geometry.normalize", worst_centroid < 1e-9 && worst_norm < 1e-12 && worst_idem < 1e-12,
        "centroid " + fmt(worst_centroid) + ", max-norm dev " + fmt(worst_norm) + ", idempotence " +
            fmt(worst_idem));
  }
  {
    bool ok = true;
    std::string detail = "exact match vs brute force";
    for (int t = 0; t < trials && ok; ++t) {
      const PointCloud c = random_cloud(opt.quick ? 64 : 200, mix_seed(seed, 0x11, t));
      const int n_c = 8 + t % 8;
      const FpsResult a = farthest_point_sampling(c, n_c);
      const FpsResult b = reference::fps_bruteforce(c, n_c);
      if (a.center_indices != b.center_indices) {
        ok = false;
        detail = "mismatch at trial " + std::to_string(t);
      }
      const PatchSet pa = knn_group(c, a, 8);
      const PatchSet pb = reference::knn_fullsort(c, a.centers, a.center_indices, 8);
      if (pa.patch_indices != pb.patch_indices) {
        ok = false;
        detail = "knn mismatch at trial " + std::to_string(t);
      }
    }
    add("geometry.fps_knn_oracle", ok, detail);
  }
  {
    bool ok = true;
    std::string detail = "index structure invariant under isometry";
    for (int t = 0; t < trials && ok; ++t) {
      const PointCloud c = random_cloud(96, mix_seed(seed, 0x12, t));
      PointCloud moved = apply_rotation(c, random_rotation(mix_seed(seed, 0x13, t)));
      for (Point3& p : moved.points) p = p + Point3{0.3, -1.2, 2.5};
      const FpsResult a = farthest_point_sampling(c, 12);
      const FpsResult b = farthest_point_sampling(moved, 12);
      if (a.center_indices != b.center_indices) {
        ok = false;
        detail = "fps changed under isometry, trial " + std::to_string(t);
      }
      if (knn_group(c, a, 8).patch_indices != knn_group(moved, b, 8).patch_indices) {
        ok = false;
        detail = "knn changed under isometry, trial " + std::to_string(t);
      }
    }
    add("geometry.isometry_equivariance", ok, detail);
  }

  // --- serialize ---
  {
    bool perm_ok = true, replay_ok = true, degenerate_ok = true;
    std::string witness;
    for (int t = 0; t < trials * 4; ++t) {
      const int n_c = 2 + static_cast<int>(mix_seed(seed, 0x20, t) % 63);
      const auto centers = random_centers(n_c, mix_seed(seed, 0x21, t));
      const Serialization s = nimba_reorder(centers, 0.8);
      if (!is_permutation_of_iota(s.order)) {
        perm_ok = false;
        witness = "non-permutation at trial " + std::to_string(t);
      }
      if (s.order != reference::nimba_replay(centers, 0.8).order) {
        replay_ok = false;
        witness = "replay mismatch at trial " + std::to_string(t);
      }
      const auto ysorted = sort_axis(centers, Axis::Y).order;
      if (nimba_reorder(centers, 0.0).order != ysorted ||
          nimba_reorder(centers, 2.0 * std::sqrt(3.0)).order != ysorted) {
        degenerate_ok = false;
        witness = "degenerate threshold moved the order, trial " + std::to_string(t);
      }
    }
    add("serialize.permutation_validity", perm_ok, perm_ok ? "all outputs bijective" : witness);
    add("serialize.greedy_replay", replay_ok, replay_ok ? "replay reproduces output" : witness);
    add("serialize.degenerate_thresholds", degenerate_ok,
        degenerate_ok ? "r=0 and r>=2sqrt(3) keep the y-sort" : witness);
  }
  {
    bool ok = true;
    std::string detail = "order stable under translation and y-rotation";
    for (int t = 0; t < trials && ok; ++t) {
      const auto centers = random_centers(24, mix_seed(seed, 0x22, t));
      const auto base = nimba_reorder(centers, 0.8).order;
      std::vector<Point3> shifted(centers);
      for (Point3& p : shifted) p = p + Point3{0.4, 7.0, -2.0};
      const Mat3 R = rotation_about_axis(1, 0.7 + 0.1 * t);
      std::vector<Point3> rotated(centers.size());
      for (std::size_t i = 0; i < centers.size(); ++i) {
        const Point3& p = centers[i];
        rotated[i] = {R[0] * p.x + R[1] * p.y + R[2] * p.z, R[3] * p.x + R[4] * p.y + R[5] * p.z,
                      R[6] * p.x + R[7] * p.y + R[8] * p.z};
      }
      if (nimba_reorder(shifted, 0.8).order != base || nimba_reorder(rotated, 0.8).order != base) {
        ok = false;
        detail = "order changed, trial " + std::to_string(t);
      }
    }
    add("serialize.isometry_stability", ok, detail);
  }

  // --- ssm ---
  {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      Rng rng(mix_seed(seed, 0x30, t));
      const int d = 2 + static_cast<int>(rng.next_u64() % 7);
      const int n = 1 + static_cast<int>(rng.next_u64() % 8);
      const int len = 2 + static_cast<int>(rng.next_u64() % 63);
      const S6Params p = S6Params::random(d, n, mix_seed(seed, 0x31, t));
      const SequenceBatch X = random_seq(1, len, d, mix_seed(seed, 0x32, t));
      const SequenceBatch Y = s6_scan(p, X);
      for (int c = 0; c < d; ++c) {
        const auto phi = s6_materialize(p, X, c);
        for (int i = 0; i < len; ++i) {
          double acc = 0.0;
          for (int j = 0; j < len; ++j) acc += phi[static_cast<std::size_t>(i) * len + j] * X.at(0, j, c);
          worst = std::max(worst, std::abs(acc - Y.at(0, i, c)));
        }
      }
    }
    add("ssm.scan_matrix_equivalence", worst < 1e-10, "max |scan - matrix| = " + fmt(worst));
  }
  {
    bool ok = true;
    std::string detail = "strict upper exactly zero";
    S6Params p = S6Params::random(4, 3, mix_seed(seed, 0x33));
    const SequenceBatch X = random_seq(1, 12, 4, mix_seed(seed, 0x34));
    for (int c = 0; c < 4 && ok; ++c) {
      const auto phi = s6_materialize(p, X, c);
      for (int i = 0; i < 12 && ok; ++i)
        for (int j = i + 1; j < 12; ++j)
          if (phi[static_cast<std::size_t>(i) * 12 + j] != 0.0) {
            ok = false;
            detail = "nonzero upper entry";
          }
    }
    add("ssm.lower_triangular", ok, detail);
  }
  {
    bool ok = true;
    std::string detail = "earlier outputs unchanged by later inputs";
    S6Params p = S6Params::random(5, 4, mix_seed(seed, 0x35));
    SequenceBatch X = random_seq(1, 16, 5, mix_seed(seed, 0x36));
    const SequenceBatch Y = s6_scan(p, X);
    SequenceBatch X2 = X;
    const int j = 10;
    for (int c = 0; c < 5; ++c) X2.at(0, j, c) += 3.0;
    const SequenceBatch Y2 = s6_scan(p, X2);
    for (int i = 0; i < j && ok; ++i)
      for (int c = 0; c < 5; ++c)
        if (Y.at(0, i, c) != Y2.at(0, i, c)) {
          ok = false;
          detail = "output " + std::to_string(i) + " moved";
        }
    add("ssm.causality", ok, detail);
  }
  {
    double worst = 0.0, worst_rowsum = 0.0;
    for (int t = 0; t < trials; ++t) {
      Rng rng(mix_seed(seed, 0x37, t));
      const int d = 2 + static_cast<int>(rng.next_u64() % 7);
      const int len = 2 + static_cast<int>(rng.next_u64() % 15);
      const AttnParams p = AttnParams::random(d, mix_seed(seed, 0x38, t));
      const SequenceBatch X = random_seq(1, len, d, mix_seed(seed, 0x39, t));
      std::vector<int> perm(len);
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = len; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(0, i - 1)]);
      SequenceBatch PX(1, len, d);
      for (int i = 0; i < len; ++i)
        for (int c = 0; c < d; ++c) PX.at(0, i, c) = X.at(0, perm[i], c);
      const SequenceBatch Y = sdpa(p, X, false);
      const SequenceBatch PY = sdpa(p, PX, false);
      for (int i = 0; i < len; ++i)
        for (int c = 0; c < d; ++c)
          worst = std::max(worst, std::abs(PY.at(0, i, c) - Y.at(0, perm[i], c)));
      const auto W = sdpa_weights(p, X, false);
      for (int i = 0; i < len; ++i) {
        double s = 0.0;
        for (int jj = 0; jj < len; ++jj) s += W[static_cast<std::size_t>(i) * len + jj];
        worst_rowsum = std::max(worst_rowsum, std::abs(s - 1.0));
      }
    }
    add("ssm.attention_permutation_equivariance", worst < 1e-10, "max deviation " + fmt(worst));
    add("ssm.softmax_rows_sum_to_one", worst_rowsum < 1e-12, "max |row sum - 1| = " + fmt(worst_rowsum));
  }
  {
    const S6Params p = S6Params::random(6, 4, mix_seed(seed, 0x3A));
    const Prop2Report rep = check_prop2(p, 10, mix_seed(seed, 0x3B));
    S6Params degenerate = p;
    std::fill(degenerate.A_log.begin(), degenerate.A_log.end(), 0.0);
    std::fill(degenerate.W_B.begin(), degenerate.W_B.end(), 0.0);
    std::fill(degenerate.W_delta.begin(), degenerate.W_delta.end(), 0.0);
    std::fill(degenerate.D_skip.begin(), degenerate.D_skip.end(), 1.0);
    const Prop2Report rep0 = check_prop2(degenerate, 5, mix_seed(seed, 0x3C));
    add("ssm.order_sensitivity_witness", rep.found && rep0.max_discrepancy == 0.0,
        "witness discrepancy " + fmt(rep.max_discrepancy) + " (trial " +
            std::to_string(rep.witness_trial) + "), degenerate " + fmt(rep0.max_discrepancy));
  }
  {
    // decay factors must stay in (0, 1]: requires nonnegative A_log
    bool ok = true;
    std::string detail = "A_log >= 0 and decay factors <= 1";
    S6Params p = S6Params::random(4, 4, mix_seed(seed, 0x3D));
    if (opt.corrupt_a_log) p.A_log[1] = -0.7;
    try {
      p.validate();
      S6Cache cache;
      const SequenceBatch X = random_seq(1, 24, 4, mix_seed(seed, 0x3E));
      std::vector<double> Y(24 * 4);
      s6_forward_cached(p, X.row(0, 0), 24, cache, Y.data());
      double worst = 0.0;
      for (double a : cache.decays) worst = std::max(worst, a);
      if (worst > 1.0) {
        ok = false;
        detail = "decay factor " + fmt(worst) + " > 1";
      }
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    add("ssm.stable_recurrence", ok, detail);
  }

  // --- nn ---
  ModelConfig toy;
  toy.d_e = 8;
  toy.layers = 1;
  toy.n_points = 32;
  toy.n_c = 6;
  toy.n_p = 5;
  toy.patch_hidden = 10;
  toy.center_hidden = 6;
  toy.head_hidden = 12;
  toy.state_size = 4;
  toy.classes = 2;
  {
    const Model model = Model::init(toy, mix_seed(seed, 0x40));
    const PointCloud cloud = random_cloud(toy.n_points, mix_seed(seed, 0x41));
    PreppedSample s = prep_sample(normalize(cloud), 0, toy);
    const SequenceBatch t1 = embed_patches(model, s.patches);
    PatchSet shuffled = s.patches;
    Rng rng(mix_seed(seed, 0x42));
    for (auto& patch : shuffled.patches)
      for (std::size_t i = patch.size(); i > 1; --i)
        std::swap(patch[i - 1], patch[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
    const SequenceBatch t2 = embed_patches(model, shuffled);
    double worst = 0.0;
    for (std::size_t i = 0; i < t1.data.size(); ++i)
      worst = std::max(worst, std::abs(t1.data[i] - t2.data[i]));
    add("nn.embed_within_patch_invariance", worst < 1e-12, "max token deviation " + fmt(worst));
  }
  {
    ModelConfig off = toy;
    off.use_positional_embedding = false;
    Model a = Model::init(off, mix_seed(seed, 0x43));
    Model b = a;
    for (double& v : b.params.at("center.l1.w").v) v += 10.0;
    for (double& v : b.params.at("center.l2.w").v) v -= 3.0;
    const PointCloud cloud = random_cloud(off.n_points, mix_seed(seed, 0x44));
    const auto la = model_logits(a, cloud);
    const auto lb = model_logits(b, cloud);
    add("nn.pe_off_dead_branch", la == lb, "logits bit-identical with PE off");
  }
  {
    const Model model = Model::init(toy, mix_seed(seed, 0x45));
    const auto s6 = model.build_s6();
    const PointCloud cloud = random_cloud(toy.n_points, mix_seed(seed, 0x46));
    PreppedSample s = prep_sample(cloud, 0, toy);
    ForwardCache cache;
    const auto base = forward_sample(model, s6, s.patches, s.order, cache);
    double best = 0.0;
    Rng rng(mix_seed(seed, 0x47));
    for (int t = 0; t < 5; ++t) {
      Serialization perm = s.order;
      for (std::size_t i = perm.order.size(); i > 1; --i)
        std::swap(perm.order[i - 1], perm.order[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
      ForwardCache c2;
      const auto other = forward_sample(model, s6, s.patches, perm, c2);
      for (std::size_t k = 0; k < base.size(); ++k)
        best = std::max(best, std::abs(other[k] - base[k]));
    }
    add("nn.model_order_sensitivity", best > 1e-6, "max logit shift over permutations " + fmt(best));
  }
  {
    // thread-count independence of batched gradients
    const Model model = Model::init(toy, mix_seed(seed, 0x48));
    std::vector<PreppedSample> batch;
    for (int i = 0; i < 4; ++i)
      batch.push_back(prep_sample(random_cloud(toy.n_points, mix_seed(seed, 0x49, i)), i % 2, toy));
    GradSet g1, g2;
    g1.init_like(model.params);
    g2.init_like(model.params);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const double l1 = loss_and_grad(model, batch, g1);
    omp_set_num_threads(saved);
    const double l2 = loss_and_grad(model, batch, g2);
    bool same = l1 == l2;
    for (std::size_t i = 0; i < g1.g.size() && same; ++i) same = g1.g[i] == g2.g[i];
    add("nn.grad_thread_determinism", same, "1-thread vs default-thread grads bit-identical");
  }

  // --- perturb ---
  {
    double worst = 0.0;
    const PointCloud c = random_cloud(40, mix_seed(seed, 0x50));
    const PointCloud r = rotate(c, mix_seed(seed, 0x51));
    for (std::size_t i = 0; i < c.points.size(); ++i)
      for (std::size_t j = i + 1; j < c.points.size(); ++j)
        worst = std::max(worst, std::abs(std::sqrt(sq_dist(r.points[i], r.points[j])) -
                                         std::sqrt(sq_dist(c.points[i], c.points[j]))));
    add("perturb.rotation_preserves_distances", worst < 1e-12, "max |d' - d| = " + fmt(worst));
  }
  {
    const PointCloud c = random_cloud(64, mix_seed(seed, 0x52));
    PerturbSpec spec;
    spec.kind = PerturbKind::All;
    const PointCloud a = apply_perturb(c, spec, 99);
    const PointCloud b = apply_perturb(c, spec, 99);
    bool same = a.points.size() == b.points.size();
    for (std::size_t i = 0; same && i < a.points.size(); ++i)
      same = a.points[i].x == b.points[i].x && a.points[i].y == b.points[i].y &&
             a.points[i].z == b.points[i].z;
    add("perturb.seeded_determinism", same, "same seed twice gives identical clouds");
  }

  // --- datagen / io round trips ---
  {
    bool ok = true;
    std::string detail = "generated clouds satisfy the normalization contract";
    for (int k = 0; k < kShapeKindCount && ok; ++k) {
      const PointCloud c = gen_shape(static_cast<ShapeKind>(k), 128, mix_seed(seed, 0x60, k));
      double cx = 0, cy = 0, cz = 0, mx = 0;
      for (const Point3& p : c.points) {
        cx += p.x;
        cy += p.y;
        cz += p.z;
        mx = std::max(mx, norm(p));
      }
      if (std::abs(cx) / 128 > 1e-9 || std::abs(cy) / 128 > 1e-9 || std::abs(cz) / 128 > 1e-9 ||
          std::abs(mx - 1.0) > 1e-12) {
        ok = false;
        detail = "shape " + to_string(static_cast<ShapeKind>(k)) + " violates contract";
      }
    }
    add("datagen.normalized_output", ok, detail);
  }
  {
    const PointCloud c = random_cloud(33, mix_seed(seed, 0x61));
    const std::string path = "/tmp/pointseq_check_roundtrip.xyz";
    save_xyz(path, c);
    const PointCloud r = load_xyz(path);
    bool same = r.points.size() == c.points.size();
    for (std::size_t i = 0; same && i < c.points.size(); ++i)
      same = r.points[i].x == c.points[i].x && r.points[i].y == c.points[i].y &&
             r.points[i].z == c.points[i].z;
    add("io.xyz_roundtrip_exact", same, "17-digit text round trip is exact");
    std::remove(path.c_str());
  }
  {
    const Model model = Model::init(toy, mix_seed(seed, 0x62));
    const std::string path = "/tmp/pointseq_check_ckpt.bin";
    save_checkpoint(path, model);
    const Model back = load_checkpoint(path);
    bool same = true;
    for (std::size_t i = 0; i < model.params.tensors().size() && same; ++i)
      same = model.params.tensors()[i].v == back.params.tensors()[i].v;
    add("nn.checkpoint_roundtrip_exact", same, "all tensors bit-identical after reload");
    std::remove(path.c_str());
  }

  return out;
}

}  // namespace pointseq
