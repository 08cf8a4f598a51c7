#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pointseq/geometry.hpp"
#include "pointseq/serialize.hpp"
#include "pointseq/ssm.hpp"
#include "pointseq/types.hpp"

namespace pointseq {

struct ModelConfig {
  int d_e = 64;      // token width
  int layers = 4;
  int n_points = 256;
  int n_c = 32;
  int n_p = 16;
  bool use_positional_embedding = false;
  OrderingStrategy ordering = OrderingStrategy::NimbaProximity;
  double r = 0.8;
  NimbaCandidate nimba_candidate = NimbaCandidate::First;
  int expand = 2;       // block expansion factor E
  int conv_kernel = 4;  // depthwise conv width
  int state_size = 16;  // S6 state size n
  int classes = 4;
  int patch_hidden = 128;  // h of the patch encoder
  int center_hidden = 64;
  int head_hidden = 128;
  bool quadratic_skip = false;

  int d_inner() const { return expand * d_e; }
  int seq_len() const { return ordering == OrderingStrategy::AxisTriple ? 3 * n_c : n_c; }

  void validate() const;

  // Desk-scale defaults (the values above).
  static ModelConfig desk();
  // 1024 points / 64 patches / 32 per patch, width 384, 12 layers.
  static ModelConfig preset_1024();
  // 2048 points / 128 patches / 32 per patch, width 384, 12 layers.
  static ModelConfig preset_2048();
  static ModelConfig preset(const std::string& name);
};

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> v;
  bool decay = false;  // participates in weight decay

  std::size_t size() const { return v.size(); }
};

class ParamSet {
 public:
  ParamTensor& add(const std::string& name, std::vector<int> shape, bool decay);
  ParamTensor& at(const std::string& name);
  const ParamTensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) != 0; }

  std::vector<ParamTensor>& tensors() { return tensors_; }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }
  std::size_t total_size() const;

 private:
  std::vector<ParamTensor> tensors_;
  std::map<std::string, int> by_name_;
};

// Gradient buffers aligned with a ParamSet (same tensor order and sizes).
struct GradSet {
  std::vector<std::vector<double>> g;

  void init_like(const ParamSet& p);
  void zero();
  void add_scaled(const GradSet& other, double s);
  std::vector<double>& at(const ParamSet& p, const std::string& name);
};

struct Model {
  ModelConfig cfg;
  ParamSet params;

  static Model init(const ModelConfig& cfg, std::uint64_t seed);

  // S6 parameter views for every block; A_log is exp(a_ln) so the stored
  // (trained) parameter is unconstrained while the decay rate stays positive.
  std::vector<S6Params> build_s6() const;
};

// ---- forward caches (one sample) ----

struct PatchEncCache {
  int n_c = 0, n_p = 0, h = 0, d_e = 0;
  std::vector<double> pts;                     // n_c*n_p x 3, patch-relative
  std::vector<double> z1_pre, z1, z2_pre, z2;  // n_c*n_p x h
  std::vector<int> g_arg;                      // n_c x h
  std::vector<double> g;                       // n_c x h
  std::vector<double> cat;                     // n_c*n_p x 2h, [point feature; pooled]
  std::vector<double> u;                       // n_c*n_p x d_e
  std::vector<int> tok_arg;                    // n_c x d_e
  std::vector<double> tokens;                  // n_c x d_e
};

struct CenterEncCache {
  std::vector<double> h_pre, h_act;  // n_c*h_pe
  std::vector<double> out;           // n_c*d_e
};

struct BlockCache {
  int len = 0;
  std::vector<double> x_in;      // N x d
  std::vector<double> xn;        // N x d (pre-norm output)
  std::vector<double> rms_inv;   // N
  std::vector<double> u_main;    // N x D
  std::vector<double> u_gate;    // N x D
  std::vector<double> conv_pre;  // N x D
  std::vector<double> m;         // N x D (silu(conv_pre), scan input)
  S6Cache s6;
  std::vector<double> y_ssm;  // N x D
  std::vector<double> gated;  // N x D
};

struct HeadCache {
  std::vector<double> pooled;  // 2d
  std::vector<int> max_arg;    // d
  std::vector<double> h1_pre, h1, h2_pre, h2;
  std::vector<double> logits;
};

struct ForwardCache {
  PatchEncCache patch;
  CenterEncCache center;
  std::vector<double> tokens;  // n_c x d_e, PE already added when enabled
  Serialization order;
  std::vector<double> x0;  // seq input, N x d
  std::vector<BlockCache> blocks;
  std::vector<double> x_pre_norm;     // last block output, N x d
  std::vector<double> x_norm;         // final-normed sequence, N x d
  std::vector<double> final_rms_inv;  // N
  HeadCache head;
  int seq_len = 0;
};

// ---- spec surface ----

// One token per patch; invariant to permuting the points inside a patch.
SequenceBatch embed_patches(const Model& m, const PatchSet& patches);

// One d_e vector per center (added to patch tokens when PE is enabled).
SequenceBatch embed_centers(const Model& m, const std::vector<Point3>& centers);

// Mamba-backbone encoder: pre-norm blocks with residuals, then a final norm.
// Throws std::runtime_error("numerical overflow at layer <i>") on non-finite
// activations.
SequenceBatch encoder_forward(const Model& m, const SequenceBatch& tokens);

// mean+max pooling over the sequence, then a 3-layer head to logits.
std::vector<double> classify(const Model& m, const SequenceBatch& encoded, int batch_item = 0);

// ---- training-path internals (cached single-sample pipeline) ----

// tokens(+PE) -> ordered sequence -> encoder -> head. Returns logits.
std::vector<double> forward_sample(const Model& m, const std::vector<S6Params>& s6,
                                   const PatchSet& patches, const Serialization& order,
                                   ForwardCache& cache);

// Backprop of one sample given dL/dlogits. Parameter grads accumulate into gs.
void backward_sample(const Model& m, const std::vector<S6Params>& s6, const PatchSet& patches,
                     const ForwardCache& cache, const std::vector<double>& dlogits, GradSet& gs);

// Cross entropy of a logit vector; writes softmax probabilities if probs != nullptr.
double cross_entropy(const std::vector<double>& logits, int label, std::vector<double>* probs = nullptr);

// A preprocessed training sample: patches plus its serialization.
struct PreppedSample {
  PatchSet patches;
  Serialization order;
  int label = 0;
};

// Mean cross-entropy over the batch and exact gradients for every parameter.
// Samples are processed in parallel; gradients reduce in sample order, so the
// result is bit-identical for any thread count.
double loss_and_grad(const Model& m, const std::vector<PreppedSample>& batch, GradSet& gs,
                     std::vector<int>* predictions = nullptr);

// Full inference pipeline for a raw cloud (normalize -> FPS -> kNN -> order).
std::vector<double> model_logits(const Model& m, const PointCloud& cloud);
PreppedSample prep_sample(const PointCloud& cloud, int label, const ModelConfig& cfg);

// ---- checkpoint container (binary, bit-exact round trip) ----

void save_checkpoint(const std::string& path, const Model& m);
Model load_checkpoint(const std::string& path);

// ModelConfig <-> key=value text block (embedded in checkpoints and metrics).
std::string config_to_string(const ModelConfig& cfg);
ModelConfig config_from_string(const std::string& text);

}  // namespace pointseq
