#pragma once

#include <cstdint>
#include <vector>

#include "pointseq/types.hpp"

namespace pointseq {

// Selective state-space recurrence parameters. Each channel carries an
// independent size-n state; B/C projections are shared across channels.
// A_log must be elementwise nonnegative so the decay exp(-delta * A_log)
// stays in (0, 1].
struct S6Params {
  int d = 0;  // model width
  int n = 0;  // state size
  std::vector<double> W_delta;  // d x d
  std::vector<double> b_delta;  // d
  std::vector<double> A_log;    // d x n, entries >= 0
  std::vector<double> W_B;      // n x d
  std::vector<double> W_C;      // n x d
  std::vector<double> D_skip;   // d

  // Optional input-dependent skip D_i = W_D x_i (so the skip term becomes
  // (W_D x_i) .* x_i, quadratic in the input). Off by default.
  bool quadratic_skip = false;
  std::vector<double> W_D;  // d x d, used only when quadratic_skip

  void validate() const;

  static S6Params random(int d, int n, std::uint64_t seed, double scale = 0.5);
};

struct AttnParams {
  int d = 0;
  std::vector<double> W_Q, W_K, W_V;  // d x d each

  static AttnParams random(int d, std::uint64_t seed, double scale = 0.5);
};

// Per-token intermediates of one scan, kept so the backward pass can reuse
// them. Only the training path fills `states`/`decays`.
struct S6Cache {
  int len = 0, d = 0, n = 0;
  std::vector<double> delta_pre;  // N x d, before softplus
  std::vector<double> delta;      // N x d
  std::vector<double> bv;         // N x n
  std::vector<double> cv;         // N x n
  std::vector<double> states;     // N x d x n
  std::vector<double> decays;     // N x d x n, exp(-delta * A_log)
  std::vector<double> dvec;       // N x d, input-dependent skip (quadratic variant only)
};

// Left-to-right recurrence, zero initial state, causal by construction.
// Batch items and channels are independent streams (OpenMP across them).
SequenceBatch s6_scan(const S6Params& p, const SequenceBatch& X);

// Single sequence, with intermediates captured for backprop.
void s6_forward_cached(const S6Params& p, const double* X, int len, S6Cache& cache, double* Y);

// Backward through one cached scan. dX is accumulated (+=); parameter
// gradients are accumulated into the given buffers (same shapes as params).
struct S6Grads {
  std::vector<double>*W_delta, *b_delta, *A_log, *W_B, *W_C, *D_skip, *W_D;
};
void s6_backward(const S6Params& p, const double* X, const S6Cache& cache, const double* dY,
                 double* dX, const S6Grads& g);

// The N x N token-mixing matrix of one channel: strictly lower entries carry
// decay products, the diagonal is c_i.b_i + skip, strictly upper is exactly 0.
std::vector<double> s6_materialize(const S6Params& p, const SequenceBatch& X, int channel, int batch_item = 0);

// Softmax attention. causal = mask strictly upper logits before softmax.
SequenceBatch sdpa(const AttnParams& p, const SequenceBatch& X, bool causal);

// Row-stochastic attention weights for one batch item (test/inspection aid).
std::vector<double> sdpa_weights(const AttnParams& p, const SequenceBatch& X, bool causal, int batch_item = 0);

// Permutation-sensitivity probe: random length-2 inputs, swap the rows, and
// compare scan outputs under the permutation map.
struct Prop2Report {
  double max_discrepancy = 0.0;
  int witness_trial = -1;
  SequenceBatch witness;
  bool found = false;  // discrepancy > threshold in some trial
};
Prop2Report check_prop2(const S6Params& p, int trials, std::uint64_t seed, double threshold = 1e-6);

}  // namespace pointseq
