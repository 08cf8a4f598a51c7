#include "pointseq/ssm.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "pointseq/linalg.hpp"
#include "pointseq/mathfn.hpp"
#include "pointseq/rng.hpp"

namespace pointseq {

void S6Params::validate() const {
  auto expect = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) throw std::invalid_argument(std::string("S6Params: bad size for ") + what);
  };
  expect(W_delta.size(), static_cast<std::size_t>(d) * d, "W_delta");
  expect(b_delta.size(), static_cast<std::size_t>(d), "b_delta");
  expect(A_log.size(), static_cast<std::size_t>(d) * n, "A_log");
  expect(W_B.size(), static_cast<std::size_t>(n) * d, "W_B");
  expect(W_C.size(), static_cast<std::size_t>(n) * d, "W_C");
  expect(D_skip.size(), static_cast<std::size_t>(d), "D_skip");
  if (quadratic_skip) expect(W_D.size(), static_cast<std::size_t>(d) * d, "W_D");
  for (double a : A_log) {
    if (!(a >= 0.0)) throw std::invalid_argument("S6Params: A_log entries must be nonnegative");
  }
  auto finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (!finite(W_delta) || !finite(b_delta) || !finite(A_log) || !finite(W_B) || !finite(W_C) ||
      !finite(D_skip) || !finite(W_D))
    throw std::invalid_argument("S6Params: non-finite entry");
}

S6Params S6Params::random(int d, int n, std::uint64_t seed, double scale) {
  Rng rng(seed);
  S6Params p;
  p.d = d;
  p.n = n;
  auto fill = [&](std::vector<double>& v, std::size_t count) {
    v.resize(count);
    for (double& x : v) x = rng.uniform(-scale, scale);
  };
  fill(p.W_delta, static_cast<std::size_t>(d) * d);
  fill(p.b_delta, d);
  p.A_log.resize(static_cast<std::size_t>(d) * n);
  for (double& a : p.A_log) a = rng.uniform(0.05, 1.5);
  fill(p.W_B, static_cast<std::size_t>(n) * d);
  fill(p.W_C, static_cast<std::size_t>(n) * d);
  fill(p.D_skip, d);
  return p;
}

AttnParams AttnParams::random(int d, std::uint64_t seed, double scale) {
  Rng rng(seed);
  AttnParams p;
  p.d = d;
  auto fill = [&](std::vector<double>& v) {
    v.resize(static_cast<std::size_t>(d) * d);
    for (double& x : v) x = rng.uniform(-scale, scale);
  };
  fill(p.W_Q);
  fill(p.W_K);
  fill(p.W_V);
  return p;
}

void s6_forward_cached(const S6Params& p, const double* X, int len, S6Cache& cache, double* Y) {
  const int d = p.d, n = p.n;
  cache.len = len;
  cache.d = d;
  cache.n = n;
  cache.delta_pre.assign(static_cast<std::size_t>(len) * d, 0.0);
  cache.delta.resize(static_cast<std::size_t>(len) * d);
  cache.bv.assign(static_cast<std::size_t>(len) * n, 0.0);
  cache.cv.assign(static_cast<std::size_t>(len) * n, 0.0);
  cache.states.assign(static_cast<std::size_t>(len) * d * n, 0.0);
  cache.decays.resize(static_cast<std::size_t>(len) * d * n);
  if (p.quadratic_skip) cache.dvec.assign(static_cast<std::size_t>(len) * d, 0.0);

  // token-wise projections
  for (int i = 0; i < len; ++i) {
    const double* x = X + static_cast<std::size_t>(i) * d;
    double* dp = cache.delta_pre.data() + static_cast<std::size_t>(i) * d;
    std::memcpy(dp, p.b_delta.data(), sizeof(double) * d);
    matvec(p.W_delta.data(), x, dp, d, d);
    double* dl = cache.delta.data() + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) dl[c] = softplus(dp[c]);
    matvec(p.W_B.data(), x, cache.bv.data() + static_cast<std::size_t>(i) * n, n, d);
    matvec(p.W_C.data(), x, cache.cv.data() + static_cast<std::size_t>(i) * n, n, d);
    if (p.quadratic_skip)
      matvec(p.W_D.data(), x, cache.dvec.data() + static_cast<std::size_t>(i) * d, d, d);
  }

  // recurrence per channel
  for (int c = 0; c < d; ++c) {
    const double* alog = p.A_log.data() + static_cast<std::size_t>(c) * n;
    std::vector<double> state(n, 0.0);
    for (int i = 0; i < len; ++i) {
      const double xc = X[static_cast<std::size_t>(i) * d + c];
      const double dl = cache.delta[static_cast<std::size_t>(i) * d + c];
      const double* bv = cache.bv.data() + static_cast<std::size_t>(i) * n;
      const double* cvv = cache.cv.data() + static_cast<std::size_t>(i) * n;
      double* dec = cache.decays.data() + (static_cast<std::size_t>(i) * d + c) * n;
      double* st = cache.states.data() + (static_cast<std::size_t>(i) * d + c) * n;
      const double scale = dl * xc;
      double y = 0.0;
      for (int j = 0; j < n; ++j) {
        const double a = std::exp(-dl * alog[j]);
        dec[j] = a;
        const double s = a * state[j] + scale * bv[j];
        st[j] = s;
        state[j] = s;
        y += cvv[j] * s;
      }
      const double skip = p.quadratic_skip ? cache.dvec[static_cast<std::size_t>(i) * d + c] : p.D_skip[c];
      Y[static_cast<std::size_t>(i) * d + c] = y + skip * xc;
    }
  }
}

SequenceBatch s6_scan(const S6Params& p, const SequenceBatch& X) {
  if (X.width != p.d) throw std::invalid_argument("width mismatch");
  SequenceBatch Y(X.batch, X.len, X.width);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < X.batch; ++b) {
    S6Cache cache;
    s6_forward_cached(p, X.row(b, 0), X.len, cache, Y.row(b, 0));
  }
  return Y;
}

void s6_backward(const S6Params& p, const double* X, const S6Cache& cache, const double* dY,
                 double* dX, const S6Grads& g) {
  const int len = cache.len, d = cache.d, n = cache.n;
  std::vector<double> dbv(static_cast<std::size_t>(len) * n, 0.0);
  std::vector<double> dcv(static_cast<std::size_t>(len) * n, 0.0);
  std::vector<double> ddelta(static_cast<std::size_t>(len) * d, 0.0);
  std::vector<double> ddvec;
  if (p.quadratic_skip) ddvec.assign(static_cast<std::size_t>(len) * d, 0.0);

  std::vector<double> gstate(n);  // dL/dstate for the channel being processed
  for (int c = 0; c < d; ++c) {
    const double* alog = p.A_log.data() + static_cast<std::size_t>(c) * n;
    double* dalog = g.A_log->data() + static_cast<std::size_t>(c) * n;
    std::fill(gstate.begin(), gstate.end(), 0.0);
    for (int i = len - 1; i >= 0; --i) {
      const std::size_t id = static_cast<std::size_t>(i) * d + c;
      const double dy = dY[id];
      const double xc = X[id];
      const double dl = cache.delta[id];
      const double* bv = cache.bv.data() + static_cast<std::size_t>(i) * n;
      const double* cvv = cache.cv.data() + static_cast<std::size_t>(i) * n;
      const double* st = cache.states.data() + id * n;
      const double* dec = cache.decays.data() + id * n;
      const double* st_prev = i > 0 ? cache.states.data() + (id - d) * n : nullptr;

      // skip path
      if (p.quadratic_skip) {
        ddvec[id] += dy * xc;
        dX[id] += dy * cache.dvec[id];
      } else {
        (*g.D_skip)[c] += dy * xc;
        dX[id] += dy * p.D_skip[c];
      }

      // y_i = <cv_i, s_i>
      double* dcv_i = dcv.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        dcv_i[j] += dy * st[j];
        gstate[j] += dy * cvv[j];
      }

      // s_i = dec .* s_{i-1} + (delta * x_c) * bv
      double ddl = 0.0;
      double gb_dot = 0.0;
      double* dbv_i = dbv.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double gj = gstate[j];
        const double sprev = st_prev ? st_prev[j] : 0.0;
        // decay factor: d(dec)/d(delta) = -alog * dec, d(dec)/d(alog) = -delta * dec
        const double dd = gj * sprev;
        ddl -= dd * alog[j] * dec[j];
        dalog[j] -= dd * dl * dec[j];
        gb_dot += gj * bv[j];
        dbv_i[j] += gj * dl * xc;
        // propagate to previous state
        gstate[j] = gj * dec[j];
      }
      ddl += gb_dot * xc;
      dX[id] += gb_dot * dl;
      ddelta[id] += ddl;
    }
  }

  // project token-wise gradients back through the input maps
  // delta_pre -> delta is softplus, so scale by sigmoid(delta_pre)
  std::vector<double> ddelta_pre(static_cast<std::size_t>(len) * d);
  for (std::size_t i = 0; i < ddelta_pre.size(); ++i)
    ddelta_pre[i] = ddelta[i] * sigmoid(cache.delta_pre[i]);

  // dX += ddelta_pre * W_delta ; dW_delta += ddelta_pre^T X ; db_delta += col sums
  gemm_nn(ddelta_pre.data(), p.W_delta.data(), dX, len, d, d);
  gemm_tn(ddelta_pre.data(), X, g.W_delta->data(), len, d, d);
  for (int i = 0; i < len; ++i)
    for (int c = 0; c < d; ++c) (*g.b_delta)[c] += ddelta_pre[static_cast<std::size_t>(i) * d + c];

  gemm_nn(dbv.data(), p.W_B.data(), dX, len, n, d);
  gemm_tn(dbv.data(), X, g.W_B->data(), len, n, d);
  gemm_nn(dcv.data(), p.W_C.data(), dX, len, n, d);
  gemm_tn(dcv.data(), X, g.W_C->data(), len, n, d);
  if (p.quadratic_skip) {
    gemm_nn(ddvec.data(), p.W_D.data(), dX, len, d, d);
    gemm_tn(ddvec.data(), X, g.W_D->data(), len, d, d);
  }
}

std::vector<double> s6_materialize(const S6Params& p, const SequenceBatch& X, int channel, int batch_item) {
  if (X.width != p.d) throw std::invalid_argument("width mismatch");
  if (channel < 0 || channel >= p.d) throw std::invalid_argument("channel out of range");
  if (batch_item < 0 || batch_item >= X.batch) throw std::invalid_argument("batch item out of range");

  const int len = X.len, d = p.d, n = p.n;
  const double* Xb = X.row(batch_item, 0);

  std::vector<double> delta(static_cast<std::size_t>(len), 0.0);
  std::vector<double> bv(static_cast<std::size_t>(len) * n, 0.0);
  std::vector<double> cv(static_cast<std::size_t>(len) * n, 0.0);
  std::vector<double> dskip(static_cast<std::size_t>(len), 0.0);
  std::vector<double> pre(d);
  for (int i = 0; i < len; ++i) {
    const double* x = Xb + static_cast<std::size_t>(i) * d;
    std::memcpy(pre.data(), p.b_delta.data(), sizeof(double) * d);
    matvec(p.W_delta.data(), x, pre.data(), d, d);
    delta[i] = softplus(pre[channel]);
    matvec(p.W_B.data(), x, bv.data() + static_cast<std::size_t>(i) * n, n, d);
    matvec(p.W_C.data(), x, cv.data() + static_cast<std::size_t>(i) * n, n, d);
    if (p.quadratic_skip) {
      double acc = 0.0;
      const double* wd = p.W_D.data() + static_cast<std::size_t>(channel) * d;
      for (int k = 0; k < d; ++k) acc += wd[k] * x[k];
      dskip[i] = acc;
    } else {
      dskip[i] = p.D_skip[channel];
    }
  }

  const double* alog = p.A_log.data() + static_cast<std::size_t>(channel) * n;
  std::vector<double> phi(static_cast<std::size_t>(len) * len, 0.0);
  std::vector<double> prod(n);
  for (int j = 0; j < len; ++j) {
    // contribution of input j: delta_j * bv_j, decayed forward to each i >= j
    for (int t = 0; t < n; ++t) prod[t] = delta[j] * bv[static_cast<std::size_t>(j) * n + t];
    for (int i = j; i < len; ++i) {
      if (i > j) {
        for (int t = 0; t < n; ++t) prod[t] *= std::exp(-delta[i] * alog[t]);
      }
      double e = dot(cv.data() + static_cast<std::size_t>(i) * n, prod.data(), n);
      if (i == j) e += dskip[i];
      phi[static_cast<std::size_t>(i) * len + j] = e;
    }
  }
  return phi;
}

namespace {

void softmax_row(double* row, int n) {
  double mx = row[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < n; ++j) row[j] *= inv;
}

}  // namespace

SequenceBatch sdpa(const AttnParams& p, const SequenceBatch& X, bool causal) {
  if (X.width != p.d) throw std::invalid_argument("width mismatch");
  const int d = p.d, len = X.len;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  SequenceBatch Y(X.batch, len, d);

#pragma omp parallel for schedule(static)
  for (int b = 0; b < X.batch; ++b) {
    std::vector<double> Q(static_cast<std::size_t>(len) * d, 0.0);
    std::vector<double> K(static_cast<std::size_t>(len) * d, 0.0);
    std::vector<double> V(static_cast<std::size_t>(len) * d, 0.0);
    const double* Xb = X.row(b, 0);
    gemm_nt(Xb, p.W_Q.data(), Q.data(), len, d, d);
    gemm_nt(Xb, p.W_K.data(), K.data(), len, d, d);
    gemm_nt(Xb, p.W_V.data(), V.data(), len, d, d);

    std::vector<double> logits(len);
    for (int i = 0; i < len; ++i) {
      const double* qi = Q.data() + static_cast<std::size_t>(i) * d;
      const int cols = causal ? i + 1 : len;
      for (int j = 0; j < cols; ++j)
        logits[j] = inv_sqrt_d * dot(qi, K.data() + static_cast<std::size_t>(j) * d, d);
      softmax_row(logits.data(), cols);
      double* yi = Y.row(b, i);
      for (int j = 0; j < cols; ++j) {
        const double w = logits[j];
        const double* vj = V.data() + static_cast<std::size_t>(j) * d;
        for (int c = 0; c < d; ++c) yi[c] += w * vj[c];
      }
    }
  }
  return Y;
}

std::vector<double> sdpa_weights(const AttnParams& p, const SequenceBatch& X, bool causal, int batch_item) {
  if (X.width != p.d) throw std::invalid_argument("width mismatch");
  const int d = p.d, len = X.len;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> Q(static_cast<std::size_t>(len) * d, 0.0);
  std::vector<double> K(static_cast<std::size_t>(len) * d, 0.0);
  const double* Xb = X.row(batch_item, 0);
  gemm_nt(Xb, p.W_Q.data(), Q.data(), len, d, d);
  gemm_nt(Xb, p.W_K.data(), K.data(), len, d, d);

  std::vector<double> W(static_cast<std::size_t>(len) * len, 0.0);
  for (int i = 0; i < len; ++i) {
    double* row = W.data() + static_cast<std::size_t>(i) * len;
    const int cols = causal ? i + 1 : len;
    const double* qi = Q.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < cols; ++j)
      row[j] = inv_sqrt_d * dot(qi, K.data() + static_cast<std::size_t>(j) * d, d);
    softmax_row(row, cols);
  }
  return W;
}

Prop2Report check_prop2(const S6Params& p, int trials, std::uint64_t seed, double threshold) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  Prop2Report rep;
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, t));
    SequenceBatch X(1, 2, p.d);
    for (double& v : X.data) v = rng.normal();
    SequenceBatch Xp(1, 2, p.d);
    for (int c = 0; c < p.d; ++c) {
      Xp.at(0, 0, c) = X.at(0, 1, c);
      Xp.at(0, 1, c) = X.at(0, 0, c);
    }
    const SequenceBatch Y = s6_scan(p, X);
    const SequenceBatch Yp = s6_scan(p, Xp);
    double disc = 0.0;
    for (int c = 0; c < p.d; ++c) {
      disc = std::max(disc, std::abs(Yp.at(0, 0, c) - Y.at(0, 1, c)));
      disc = std::max(disc, std::abs(Yp.at(0, 1, c) - Y.at(0, 0, c)));
    }
    if (disc > rep.max_discrepancy) {
      rep.max_discrepancy = disc;
      rep.witness_trial = t;
      rep.witness = X;
    }
    if (disc > threshold) {
      rep.found = true;
    }
  }
  return rep;
}

}  // namespace pointseq
