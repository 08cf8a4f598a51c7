#include "pointseq/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pointseq/linalg.hpp"
#include "pointseq/mathfn.hpp"
#include "pointseq/rng.hpp"

namespace pointseq::reference {

FpsResult fps_bruteforce(const PointCloud& cloud, int n_c, FpsStart start) {
  const std::int64_t n = static_cast<std::int64_t>(cloud.points.size());
  if (n == 0) throw std::invalid_argument("empty input");
  if (n_c <= 0) throw std::invalid_argument("sample count must be positive");
  if (n_c > n) throw std::invalid_argument("sample larger than population");

  std::int64_t first = start.index;
  if (start.kind == FpsStart::Kind::RandomSeeded) {
    Rng rng(start.seed);
    first = rng.uniform_int(0, n - 1);
  }

  FpsResult res;
  res.center_indices.push_back(first);
  res.centers.push_back(cloud.points[first]);
  std::vector<char> selected(n, 0);
  selected[first] = 1;

  for (int step = 1; step < n_c; ++step) {
    double best_d2 = -1.0;
    std::int64_t best = -1;
    for (std::int64_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      double min_d2 = std::numeric_limits<double>::infinity();
      for (std::int64_t s : res.center_indices)
        min_d2 = std::min(min_d2, sq_dist(cloud.points[i], cloud.points[s]));
      if (min_d2 > best_d2) {
        best_d2 = min_d2;
        best = i;
      }
    }
    selected[best] = 1;
    res.center_indices.push_back(best);
    res.centers.push_back(cloud.points[best]);
  }
  return res;
}

PatchSet knn_fullsort(const PointCloud& cloud, const std::vector<Point3>& centers,
                      const std::vector<std::int64_t>& center_indices, int n_p) {
  const std::int64_t n = static_cast<std::int64_t>(cloud.points.size());
  if (static_cast<std::int64_t>(n_p) > n) throw std::invalid_argument("patch size larger than population");
  PatchSet ps;
  ps.centers = centers;
  ps.center_indices = center_indices;
  ps.n_p = n_p;
  ps.patches.resize(centers.size());
  ps.patch_indices.resize(centers.size());
  for (std::size_t j = 0; j < centers.size(); ++j) {
    std::vector<std::pair<double, std::int64_t>> cand(n);
    for (std::int64_t i = 0; i < n; ++i) cand[i] = {sq_dist(cloud.points[i], centers[j]), i};
    std::sort(cand.begin(), cand.end());
    for (int k = 0; k < n_p; ++k) {
      ps.patches[j].push_back(cloud.points[cand[k].second] - centers[j]);
      ps.patch_indices[j].push_back(cloud.source_indices.empty()
                                        ? cand[k].second
                                        : cloud.source_indices[cand[k].second]);
    }
  }
  return ps;
}

// Arithmetic mirrors the kernel expression-for-expression so the outputs are
// bit-identical; only the threading differs.
SequenceBatch s6_scan_serial(const S6Params& p, const SequenceBatch& X) {
  if (X.width != p.d) throw std::invalid_argument("width mismatch");
  const int d = p.d, n = p.n, len = X.len;
  SequenceBatch Y(X.batch, len, d);
  std::vector<double> delta(d), pre(d), bv(n), cv(n), dvec(d);
  std::vector<double> state(static_cast<std::size_t>(d) * n);
  for (int b = 0; b < X.batch; ++b) {
    std::fill(state.begin(), state.end(), 0.0);
    for (int i = 0; i < len; ++i) {
      const double* x = X.row(b, i);
      pre = p.b_delta;
      matvec(p.W_delta.data(), x, pre.data(), d, d);
      for (int c = 0; c < d; ++c) delta[c] = softplus(pre[c]);
      std::fill(bv.begin(), bv.end(), 0.0);
      std::fill(cv.begin(), cv.end(), 0.0);
      matvec(p.W_B.data(), x, bv.data(), n, d);
      matvec(p.W_C.data(), x, cv.data(), n, d);
      if (p.quadratic_skip) {
        std::fill(dvec.begin(), dvec.end(), 0.0);
        matvec(p.W_D.data(), x, dvec.data(), d, d);
      }
      double* y = Y.row(b, i);
      for (int c = 0; c < d; ++c) {
        const double dl = delta[c];
        const double scale = dl * x[c];
        double acc = 0.0;
        double* st = state.data() + static_cast<std::size_t>(c) * n;
        const double* alog = p.A_log.data() + static_cast<std::size_t>(c) * n;
        for (int j = 0; j < n; ++j) {
          const double a = std::exp(-dl * alog[j]);
          const double s = a * st[j] + scale * bv[j];
          st[j] = s;
          acc += cv[j] * s;
        }
        y[c] = acc + (p.quadratic_skip ? dvec[c] : p.D_skip[c]) * x[c];
      }
    }
  }
  return Y;
}

// Same expression order as the kernel (exp, reciprocal, weighted accumulate)
// so outputs agree bitwise.
SequenceBatch sdpa_serial(const AttnParams& p, const SequenceBatch& X, bool causal) {
  if (X.width != p.d) throw std::invalid_argument("width mismatch");
  const int d = p.d, len = X.len;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  SequenceBatch Y(X.batch, len, d);
  for (int b = 0; b < X.batch; ++b) {
    std::vector<double> Q(static_cast<std::size_t>(len) * d, 0.0), K(Q), V(Q);
    const double* Xb = X.row(b, 0);
    gemm_nt(Xb, p.W_Q.data(), Q.data(), len, d, d);
    gemm_nt(Xb, p.W_K.data(), K.data(), len, d, d);
    gemm_nt(Xb, p.W_V.data(), V.data(), len, d, d);
    std::vector<double> w(len);
    for (int i = 0; i < len; ++i) {
      const int cols = causal ? i + 1 : len;
      for (int j = 0; j < cols; ++j)
        w[j] = inv_sqrt_d * dot(Q.data() + static_cast<std::size_t>(i) * d,
                                K.data() + static_cast<std::size_t>(j) * d, d);
      double mx = w[0];
      for (int j = 1; j < cols; ++j) mx = std::max(mx, w[j]);
      double sum = 0.0;
      for (int j = 0; j < cols; ++j) {
        w[j] = std::exp(w[j] - mx);
        sum += w[j];
      }
      const double inv = 1.0 / sum;
      for (int j = 0; j < cols; ++j) w[j] *= inv;
      double* y = Y.row(b, i);
      for (int j = 0; j < cols; ++j) {
        const double ww = w[j];
        const double* vj = V.data() + static_cast<std::size_t>(j) * d;
        for (int c = 0; c < d; ++c) y[c] += ww * vj[c];
      }
    }
  }
  return Y;
}

Serialization nimba_replay(const std::vector<Point3>& centers, double r, NimbaCandidate candidate) {
  // y-sort with index tie-break
  std::vector<int> ord(centers.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return centers[a].y < centers[b].y; });

  const double r2 = r * r;
  const int n = static_cast<int>(ord.size());
  for (int i = 0; i + 1 < n; ++i) {
    if (sq_dist(centers[ord[i]], centers[ord[i + 1]]) < r2) continue;
    int pick = -1;
    double best = r2;
    for (int j = i + 2; j < n; ++j) {
      const double d2 = sq_dist(centers[ord[i]], centers[ord[j]]);
      if (candidate == NimbaCandidate::First) {
        if (d2 < r2) {
          pick = j;
          break;
        }
      } else if (d2 < best) {
        best = d2;
        pick = j;
      }
    }
    if (pick >= 0) {
      const int moved = ord[pick];
      ord.erase(ord.begin() + pick);
      ord.insert(ord.begin() + i + 1, moved);
    }
  }
  Serialization s;
  s.order = ord;
  s.strategy = OrderingStrategy::NimbaProximity;
  s.replication = 1;
  s.r = r;
  return s;
}

}  // namespace pointseq::reference
