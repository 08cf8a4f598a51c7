#include "pointseq/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "pointseq/linalg.hpp"
#include "pointseq/mathfn.hpp"
#include "pointseq/rng.hpp"

namespace pointseq {

namespace {
constexpr double kRmsEps = 1e-6;
}

void ModelConfig::validate() const {
  if (d_e < 1 || n_points < 1 || n_c < 1 || n_p < 1 || expand < 1 || conv_kernel < 1 ||
      state_size < 1 || classes < 1 || patch_hidden < 1 || center_hidden < 1 || head_hidden < 1)
    throw std::invalid_argument("ModelConfig: counts must be >= 1");
  if (layers < 0) throw std::invalid_argument("ModelConfig: layers must be >= 0");
  if (n_p > n_points) throw std::invalid_argument("ModelConfig: n_p > n_points");
  if (n_c > n_points) throw std::invalid_argument("ModelConfig: n_c > n_points");
  if (!(r >= 0.0)) throw std::invalid_argument("ModelConfig: r must be nonnegative");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::preset_1024() {
  ModelConfig c;
  c.d_e = 384;
  c.layers = 12;
  c.n_points = 1024;
  c.n_c = 64;
  c.n_p = 32;
  c.patch_hidden = 128;
  c.center_hidden = 128;
  c.head_hidden = 256;
  c.classes = 40;
  return c;
}

ModelConfig ModelConfig::preset_2048() {
  ModelConfig c = preset_1024();
  c.n_points = 2048;
  c.n_c = 128;
  c.classes = 15;
  return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "points1024") return preset_1024();
  if (name == "points2048") return preset_2048();
  throw std::invalid_argument("unknown preset: " + name);
}

ParamTensor& ParamSet::add(const std::string& name, std::vector<int> shape, bool decay) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  std::size_t sz = 1;
  for (int s : shape) sz *= static_cast<std::size_t>(s);
  ParamTensor t;
  t.name = name;
  t.shape = std::move(shape);
  t.v.assign(sz, 0.0);
  t.decay = decay;
  by_name_[name] = static_cast<int>(tensors_.size());
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

ParamTensor& ParamSet::at(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return tensors_[it->second];
}

const ParamTensor& ParamSet::at(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return tensors_[it->second];
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void GradSet::init_like(const ParamSet& p) {
  g.resize(p.tensors().size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i].assign(p.tensors()[i].size(), 0.0);
}

void GradSet::zero() {
  for (auto& v : g) std::fill(v.begin(), v.end(), 0.0);
}

void GradSet::add_scaled(const GradSet& other, double s) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& src = other.g[i];
    auto& dst = g[i];
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * src[j];
  }
}

std::vector<double>& GradSet::at(const ParamSet& p, const std::string& name) {
  for (std::size_t i = 0; i < p.tensors().size(); ++i)
    if (p.tensors()[i].name == name) return g[i];
  throw std::invalid_argument("unknown parameter: " + name);
}

namespace {

void fill_uniform(ParamTensor& t, Rng& rng, double bound) {
  for (double& x : t.v) x = rng.uniform(-bound, bound);
}

std::string block_name(int layer, const char* suffix) {
  return "block" + std::to_string(layer) + "." + suffix;
}

}  // namespace

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  ParamSet& P = m.params;
  const int d = cfg.d_e, h = cfg.patch_hidden, hc = cfg.center_hidden, H = cfg.head_hidden;
  const int D = cfg.d_inner(), n = cfg.state_size, k = cfg.conv_kernel, K = cfg.classes;

  int tensor_idx = 0;
  auto rng_for = [&]() { return Rng(mix_seed(seed, 0x9A22, tensor_idx++)); };

  auto linear = [&](const std::string& name, int out, int in) {
    ParamTensor& W = P.add(name + ".w", {out, in}, true);
    Rng rng = rng_for();
    fill_uniform(W, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    P.add(name + ".b", {out}, false);
    ++tensor_idx;
  };

  linear("patch.l1", h, 3);
  linear("patch.l2", h, h);
  linear("patch.l3", d, 2 * h);
  linear("center.l1", hc, 3);
  linear("center.l2", d, hc);

  for (int l = 0; l < cfg.layers; ++l) {
    ParamTensor& norm = P.add(block_name(l, "norm"), {d}, false);
    std::fill(norm.v.begin(), norm.v.end(), 1.0);
    ++tensor_idx;

    ParamTensor& in_proj = P.add(block_name(l, "in_proj"), {2 * D, d}, true);
    {
      Rng rng = rng_for();
      fill_uniform(in_proj, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    }
    ParamTensor& conv_w = P.add(block_name(l, "conv_w"), {D, k}, true);
    {
      Rng rng = rng_for();
      fill_uniform(conv_w, rng, 1.0 / std::sqrt(static_cast<double>(k)));
    }
    P.add(block_name(l, "conv_b"), {D}, false);
    ++tensor_idx;

    ParamTensor& dt_w = P.add(block_name(l, "dt_w"), {D, D}, true);
    {
      Rng rng = rng_for();
      fill_uniform(dt_w, rng, 1.0 / std::sqrt(static_cast<double>(D)));
    }
    ParamTensor& dt_b = P.add(block_name(l, "dt_b"), {D}, false);
    {
      Rng rng = rng_for();
      for (double& x : dt_b.v) {
        const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
        x = softplus_inverse(dt);
      }
    }
    ParamTensor& a_ln = P.add(block_name(l, "a_ln"), {D, n}, false);
    for (int c = 0; c < D; ++c)
      for (int j = 0; j < n; ++j) a_ln.v[static_cast<std::size_t>(c) * n + j] = std::log(static_cast<double>(j + 1));
    ++tensor_idx;

    ParamTensor& b_proj = P.add(block_name(l, "b_proj"), {n, D}, true);
    {
      Rng rng = rng_for();
      fill_uniform(b_proj, rng, 1.0 / std::sqrt(static_cast<double>(D)));
    }
    ParamTensor& c_proj = P.add(block_name(l, "c_proj"), {n, D}, true);
    {
      Rng rng = rng_for();
      fill_uniform(c_proj, rng, 1.0 / std::sqrt(static_cast<double>(D)));
    }
    ParamTensor& d_skip = P.add(block_name(l, "d_skip"), {D}, false);
    std::fill(d_skip.v.begin(), d_skip.v.end(), 1.0);
    ++tensor_idx;
    if (cfg.quadratic_skip) {
      ParamTensor& w_d = P.add(block_name(l, "w_d"), {D, D}, true);
      Rng rng = rng_for();
      fill_uniform(w_d, rng, 1.0 / std::sqrt(static_cast<double>(D)));
    }

    ParamTensor& out_proj = P.add(block_name(l, "out_proj"), {d, D}, true);
    {
      Rng rng = rng_for();
      fill_uniform(out_proj, rng, 1.0 / std::sqrt(static_cast<double>(D)));
    }
  }

  ParamTensor& fnorm = P.add("final_norm", {d}, false);
  std::fill(fnorm.v.begin(), fnorm.v.end(), 1.0);
  ++tensor_idx;

  linear("head.l1", H, 2 * d);
  linear("head.l2", H, H);
  linear("head.l3", K, H);
  return m;
}

std::vector<S6Params> Model::build_s6() const {
  std::vector<S6Params> out(cfg.layers);
  const int D = cfg.d_inner(), n = cfg.state_size;
  for (int l = 0; l < cfg.layers; ++l) {
    S6Params& p = out[l];
    p.d = D;
    p.n = n;
    p.W_delta = params.at(block_name(l, "dt_w")).v;
    p.b_delta = params.at(block_name(l, "dt_b")).v;
    const auto& a_ln = params.at(block_name(l, "a_ln")).v;
    p.A_log.resize(a_ln.size());
    for (std::size_t i = 0; i < a_ln.size(); ++i) p.A_log[i] = std::exp(a_ln[i]);
    p.W_B = params.at(block_name(l, "b_proj")).v;
    p.W_C = params.at(block_name(l, "c_proj")).v;
    p.D_skip = params.at(block_name(l, "d_skip")).v;
    if (cfg.quadratic_skip) {
      p.quadratic_skip = true;
      p.W_D = params.at(block_name(l, "w_d")).v;
    }
  }
  return out;
}

// ---- patch encoder ----

namespace {

// all points of all patches are processed as one matrix so the linear maps
// run as blocked GEMMs
void patch_encode_forward(const Model& m, const PatchSet& ps, PatchEncCache& c) {
  const int n_c = ps.n_c(), n_p = ps.n_p, h = m.cfg.patch_hidden, d_e = m.cfg.d_e;
  const int P = n_c * n_p;
  c.n_c = n_c;
  c.n_p = n_p;
  c.h = h;
  c.d_e = d_e;
  c.pts.resize(static_cast<std::size_t>(P) * 3);
  for (int p = 0; p < n_c; ++p) {
    if (static_cast<int>(ps.patches[p].size()) != n_p)
      throw std::invalid_argument("patch size mismatch");
    for (int i = 0; i < n_p; ++i) {
      double* dst = c.pts.data() + (static_cast<std::size_t>(p) * n_p + i) * 3;
      dst[0] = ps.patches[p][i].x;
      dst[1] = ps.patches[p][i].y;
      dst[2] = ps.patches[p][i].z;
    }
  }

  const auto& W1 = m.params.at("patch.l1.w").v;
  const auto& b1 = m.params.at("patch.l1.b").v;
  const auto& W2 = m.params.at("patch.l2.w").v;
  const auto& b2 = m.params.at("patch.l2.b").v;
  const auto& W3 = m.params.at("patch.l3.w").v;
  const auto& b3 = m.params.at("patch.l3.b").v;

  const std::size_t Ph = static_cast<std::size_t>(P) * h;
  c.z1_pre.resize(Ph);
  c.z1.resize(Ph);
  c.z2_pre.resize(Ph);
  c.z2.resize(Ph);
  for (int i = 0; i < P; ++i)
    std::memcpy(c.z1_pre.data() + static_cast<std::size_t>(i) * h, b1.data(), sizeof(double) * h);
  gemm_nt(c.pts.data(), W1.data(), c.z1_pre.data(), P, 3, h);
  for (std::size_t i = 0; i < Ph; ++i) c.z1[i] = silu(c.z1_pre[i]);
  for (int i = 0; i < P; ++i)
    std::memcpy(c.z2_pre.data() + static_cast<std::size_t>(i) * h, b2.data(), sizeof(double) * h);
  gemm_nt(c.z1.data(), W2.data(), c.z2_pre.data(), P, h, h);
  for (std::size_t i = 0; i < Ph; ++i) c.z2[i] = silu(c.z2_pre[i]);

  // per-patch max pool of the point features
  c.g.resize(static_cast<std::size_t>(n_c) * h);
  c.g_arg.resize(static_cast<std::size_t>(n_c) * h);
  for (int p = 0; p < n_c; ++p) {
    double* g = c.g.data() + static_cast<std::size_t>(p) * h;
    int* garg = c.g_arg.data() + static_cast<std::size_t>(p) * h;
    for (int i = 0; i < n_p; ++i) {
      const double* z2 = c.z2.data() + (static_cast<std::size_t>(p) * n_p + i) * h;
      for (int f = 0; f < h; ++f) {
        if (i == 0 || z2[f] > g[f]) {
          g[f] = z2[f];
          garg[f] = i;
        }
      }
    }
  }

  // stage 2 on [point feature; pooled feature], then per-patch max pool
  c.cat.resize(static_cast<std::size_t>(P) * 2 * h);
  for (int p = 0; p < n_c; ++p) {
    const double* g = c.g.data() + static_cast<std::size_t>(p) * h;
    for (int i = 0; i < n_p; ++i) {
      double* row = c.cat.data() + (static_cast<std::size_t>(p) * n_p + i) * 2 * h;
      std::memcpy(row, c.z2.data() + (static_cast<std::size_t>(p) * n_p + i) * h, sizeof(double) * h);
      std::memcpy(row + h, g, sizeof(double) * h);
    }
  }
  c.u.resize(static_cast<std::size_t>(P) * d_e);
  for (int i = 0; i < P; ++i)
    std::memcpy(c.u.data() + static_cast<std::size_t>(i) * d_e, b3.data(), sizeof(double) * d_e);
  gemm_nt(c.cat.data(), W3.data(), c.u.data(), P, 2 * h, d_e);

  c.tokens.resize(static_cast<std::size_t>(n_c) * d_e);
  c.tok_arg.resize(static_cast<std::size_t>(n_c) * d_e);
  for (int p = 0; p < n_c; ++p) {
    double* tok = c.tokens.data() + static_cast<std::size_t>(p) * d_e;
    int* targ = c.tok_arg.data() + static_cast<std::size_t>(p) * d_e;
    for (int i = 0; i < n_p; ++i) {
      const double* u = c.u.data() + (static_cast<std::size_t>(p) * n_p + i) * d_e;
      for (int f = 0; f < d_e; ++f) {
        if (i == 0 || u[f] > tok[f]) {
          tok[f] = u[f];
          targ[f] = i;
        }
      }
    }
  }
}

void patch_encode_backward(const Model& m, const PatchSet& ps, const PatchEncCache& c,
                           const double* dtok_all, GradSet& gs) {
  (void)ps;
  const int n_c = c.n_c, n_p = c.n_p, h = c.h, d_e = c.d_e;
  const int P = n_c * n_p;
  const auto& W2 = m.params.at("patch.l2.w").v;
  const auto& W3 = m.params.at("patch.l3.w").v;
  auto& gW1 = gs.at(m.params, "patch.l1.w");
  auto& gb1 = gs.at(m.params, "patch.l1.b");
  auto& gW2 = gs.at(m.params, "patch.l2.w");
  auto& gb2 = gs.at(m.params, "patch.l2.b");
  auto& gW3 = gs.at(m.params, "patch.l3.w");
  auto& gb3 = gs.at(m.params, "patch.l3.b");

  // token max-pool routes into sparse dU rows
  std::vector<double> dU(static_cast<std::size_t>(P) * d_e, 0.0);
  for (int p = 0; p < n_c; ++p) {
    const double* dtok = dtok_all + static_cast<std::size_t>(p) * d_e;
    const int* targ = c.tok_arg.data() + static_cast<std::size_t>(p) * d_e;
    for (int f = 0; f < d_e; ++f) {
      dU[(static_cast<std::size_t>(p) * n_p + targ[f]) * d_e + f] += dtok[f];
      gb3[f] += dtok[f];
    }
  }
  gemm_tn(dU.data(), c.cat.data(), gW3.data(), P, d_e, 2 * h);
  std::vector<double> dcat(static_cast<std::size_t>(P) * 2 * h, 0.0);
  gemm_nn(dU.data(), W3.data(), dcat.data(), P, d_e, 2 * h);

  // split: point-feature part goes straight to dz2, pooled part sums per
  // patch and routes through the pool argmax
  std::vector<double> dz2(static_cast<std::size_t>(P) * h);
  for (int i = 0; i < P; ++i)
    std::memcpy(dz2.data() + static_cast<std::size_t>(i) * h,
                dcat.data() + static_cast<std::size_t>(i) * 2 * h, sizeof(double) * h);
  std::vector<double> dg(h);
  for (int p = 0; p < n_c; ++p) {
    std::fill(dg.begin(), dg.end(), 0.0);
    for (int i = 0; i < n_p; ++i) {
      const double* row = dcat.data() + (static_cast<std::size_t>(p) * n_p + i) * 2 * h + h;
      for (int f = 0; f < h; ++f) dg[f] += row[f];
    }
    const int* garg = c.g_arg.data() + static_cast<std::size_t>(p) * h;
    for (int f = 0; f < h; ++f)
      dz2[(static_cast<std::size_t>(p) * n_p + garg[f]) * h + f] += dg[f];
  }

  std::vector<double> dz2_pre(static_cast<std::size_t>(P) * h);
  for (std::size_t i = 0; i < dz2_pre.size(); ++i) dz2_pre[i] = dz2[i] * silu_grad(c.z2_pre[i]);
  for (int i = 0; i < P; ++i) {
    const double* row = dz2_pre.data() + static_cast<std::size_t>(i) * h;
    for (int f = 0; f < h; ++f) gb2[f] += row[f];
  }
  gemm_tn(dz2_pre.data(), c.z1.data(), gW2.data(), P, h, h);
  std::vector<double> dz1(static_cast<std::size_t>(P) * h, 0.0);
  gemm_nn(dz2_pre.data(), W2.data(), dz1.data(), P, h, h);

  std::vector<double> dz1_pre(static_cast<std::size_t>(P) * h);
  for (std::size_t i = 0; i < dz1_pre.size(); ++i) dz1_pre[i] = dz1[i] * silu_grad(c.z1_pre[i]);
  for (int i = 0; i < P; ++i) {
    const double* row = dz1_pre.data() + static_cast<std::size_t>(i) * h;
    for (int f = 0; f < h; ++f) gb1[f] += row[f];
  }
  gemm_tn(dz1_pre.data(), c.pts.data(), gW1.data(), P, h, 3);
}

void center_encode_forward(const Model& m, const std::vector<Point3>& centers, CenterEncCache& c) {
  const int n_c = static_cast<int>(centers.size()), hc = m.cfg.center_hidden, d_e = m.cfg.d_e;
  c.h_pre.assign(static_cast<std::size_t>(n_c) * hc, 0.0);
  c.h_act.resize(static_cast<std::size_t>(n_c) * hc);
  c.out.assign(static_cast<std::size_t>(n_c) * d_e, 0.0);
  const auto& W1 = m.params.at("center.l1.w").v;
  const auto& b1 = m.params.at("center.l1.b").v;
  const auto& W2 = m.params.at("center.l2.w").v;
  const auto& b2 = m.params.at("center.l2.b").v;
  for (int i = 0; i < n_c; ++i) {
    const double xyz[3] = {centers[i].x, centers[i].y, centers[i].z};
    double* hp = c.h_pre.data() + static_cast<std::size_t>(i) * hc;
    std::memcpy(hp, b1.data(), sizeof(double) * hc);
    matvec(W1.data(), xyz, hp, hc, 3);
    double* ha = c.h_act.data() + static_cast<std::size_t>(i) * hc;
    for (int q = 0; q < hc; ++q) ha[q] = silu(hp[q]);
    double* o = c.out.data() + static_cast<std::size_t>(i) * d_e;
    std::memcpy(o, b2.data(), sizeof(double) * d_e);
    matvec(W2.data(), ha, o, d_e, hc);
  }
}

void center_encode_backward(const Model& m, const std::vector<Point3>& centers,
                            const CenterEncCache& c, const double* dout, GradSet& gs) {
  const int n_c = static_cast<int>(centers.size()), hc = m.cfg.center_hidden, d_e = m.cfg.d_e;
  const auto& W2 = m.params.at("center.l2.w").v;
  auto& gW1 = gs.at(m.params, "center.l1.w");
  auto& gb1 = gs.at(m.params, "center.l1.b");
  auto& gW2 = gs.at(m.params, "center.l2.w");
  auto& gb2 = gs.at(m.params, "center.l2.b");
  std::vector<double> dh(hc);
  for (int i = 0; i < n_c; ++i) {
    const double* dv = dout + static_cast<std::size_t>(i) * d_e;
    const double* ha = c.h_act.data() + static_cast<std::size_t>(i) * hc;
    const double* hp = c.h_pre.data() + static_cast<std::size_t>(i) * hc;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int f = 0; f < d_e; ++f) {
      const double dvf = dv[f];
      if (dvf == 0.0) continue;
      gb2[f] += dvf;
      double* w2g = gW2.data() + static_cast<std::size_t>(f) * hc;
      const double* w2 = W2.data() + static_cast<std::size_t>(f) * hc;
      for (int q = 0; q < hc; ++q) {
        w2g[q] += dvf * ha[q];
        dh[q] += dvf * w2[q];
      }
    }
    const double xyz[3] = {centers[i].x, centers[i].y, centers[i].z};
    for (int q = 0; q < hc; ++q) {
      const double dq = dh[q] * silu_grad(hp[q]);
      if (dq == 0.0) continue;
      gb1[q] += dq;
      double* w1g = gW1.data() + static_cast<std::size_t>(q) * 3;
      w1g[0] += dq * xyz[0];
      w1g[1] += dq * xyz[1];
      w1g[2] += dq * xyz[2];
    }
  }
}

// ---- RMS norm ----

void rms_forward(const double* x, int len, int d, const double* gamma, double* out, double* rms_inv) {
  for (int i = 0; i < len; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * d;
    double ms = 0.0;
    for (int c = 0; c < d; ++c) ms += xi[c] * xi[c];
    ms /= static_cast<double>(d);
    const double rinv = 1.0 / std::sqrt(ms + kRmsEps);
    rms_inv[i] = rinv;
    double* oi = out + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) oi[c] = gamma[c] * xi[c] * rinv;
  }
}

void rms_backward(const double* x, int len, int d, const double* gamma, const double* rms_inv,
                  const double* dout, double* dx, double* dgamma) {
  for (int i = 0; i < len; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * d;
    const double* doi = dout + static_cast<std::size_t>(i) * d;
    const double rinv = rms_inv[i];
    double t = 0.0;
    for (int c = 0; c < d; ++c) {
      dgamma[c] += doi[c] * xi[c] * rinv;
      t += doi[c] * gamma[c] * xi[c];
    }
    const double k = t * rinv * rinv * rinv / static_cast<double>(d);
    double* dxi = dx + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) dxi[c] += doi[c] * gamma[c] * rinv - xi[c] * k;
  }
}

// ---- Mamba block ----

void block_forward(const Model& m, int layer, const S6Params& s6p, const double* x_in, int len,
                   BlockCache& c, double* x_out) {
  const int d = m.cfg.d_e, D = m.cfg.d_inner(), k = m.cfg.conv_kernel;
  c.len = len;
  const std::size_t nd = static_cast<std::size_t>(len) * d;
  const std::size_t nD = static_cast<std::size_t>(len) * D;
  c.x_in.assign(x_in, x_in + nd);
  c.xn.resize(nd);
  c.rms_inv.resize(len);
  c.u_main.assign(nD, 0.0);
  c.u_gate.assign(nD, 0.0);
  c.conv_pre.resize(nD);
  c.m.resize(nD);
  c.y_ssm.resize(nD);
  c.gated.resize(nD);

  const auto& gamma = m.params.at(block_name(layer, "norm")).v;
  rms_forward(x_in, len, d, gamma.data(), c.xn.data(), c.rms_inv.data());

  const auto& W_in = m.params.at(block_name(layer, "in_proj")).v;
  std::vector<double> U(static_cast<std::size_t>(len) * 2 * D, 0.0);
  gemm_nt(c.xn.data(), W_in.data(), U.data(), len, d, 2 * D);
  for (int i = 0; i < len; ++i) {
    std::memcpy(c.u_main.data() + static_cast<std::size_t>(i) * D, U.data() + static_cast<std::size_t>(i) * 2 * D,
                sizeof(double) * D);
    std::memcpy(c.u_gate.data() + static_cast<std::size_t>(i) * D,
                U.data() + static_cast<std::size_t>(i) * 2 * D + D, sizeof(double) * D);
  }

  const auto& conv_w = m.params.at(block_name(layer, "conv_w")).v;
  const auto& conv_b = m.params.at(block_name(layer, "conv_b")).v;
  for (int i = 0; i < len; ++i) {
    double* cp = c.conv_pre.data() + static_cast<std::size_t>(i) * D;
    for (int ch = 0; ch < D; ++ch) {
      const double* w = conv_w.data() + static_cast<std::size_t>(ch) * k;
      double acc = conv_b[ch];
      for (int t = 0; t < k; ++t) {
        const int src = i - (k - 1) + t;
        if (src >= 0) acc += w[t] * c.u_main[static_cast<std::size_t>(src) * D + ch];
      }
      cp[ch] = acc;
    }
  }
  for (std::size_t i = 0; i < nD; ++i) c.m[i] = silu(c.conv_pre[i]);

  s6_forward_cached(s6p, c.m.data(), len, c.s6, c.y_ssm.data());

  for (std::size_t i = 0; i < nD; ++i) c.gated[i] = c.y_ssm[i] * silu(c.u_gate[i]);

  const auto& W_out = m.params.at(block_name(layer, "out_proj")).v;
  std::memcpy(x_out, x_in, sizeof(double) * nd);
  gemm_nt(c.gated.data(), W_out.data(), x_out, len, D, d);
}

void block_backward(const Model& m, int layer, const S6Params& s6p, const BlockCache& c,
                    const double* dx_out, double* dx_in, GradSet& gs) {
  const int d = m.cfg.d_e, D = m.cfg.d_inner(), k = m.cfg.conv_kernel, len = c.len;
  const std::size_t nd = static_cast<std::size_t>(len) * d;
  const std::size_t nD = static_cast<std::size_t>(len) * D;

  // residual passthrough
  for (std::size_t i = 0; i < nd; ++i) dx_in[i] += dx_out[i];

  const auto& W_out = m.params.at(block_name(layer, "out_proj")).v;
  std::vector<double> dgated(nD, 0.0);
  gemm_nn(dx_out, W_out.data(), dgated.data(), len, d, D);
  gemm_tn(dx_out, c.gated.data(), gs.at(m.params, block_name(layer, "out_proj")).data(), len, d, D);

  std::vector<double> dy_ssm(nD), du_gate(nD);
  for (std::size_t i = 0; i < nD; ++i) {
    const double sg = silu(c.u_gate[i]);
    dy_ssm[i] = dgated[i] * sg;
    du_gate[i] = dgated[i] * c.y_ssm[i] * silu_grad(c.u_gate[i]);
  }

  std::vector<double> dm(nD, 0.0);
  {
    std::vector<double> dAlog(s6p.A_log.size(), 0.0);
    S6Grads sg;
    sg.W_delta = &gs.at(m.params, block_name(layer, "dt_w"));
    sg.b_delta = &gs.at(m.params, block_name(layer, "dt_b"));
    sg.A_log = &dAlog;
    sg.W_B = &gs.at(m.params, block_name(layer, "b_proj"));
    sg.W_C = &gs.at(m.params, block_name(layer, "c_proj"));
    sg.D_skip = &gs.at(m.params, block_name(layer, "d_skip"));
    std::vector<double>* wd = nullptr;
    if (m.cfg.quadratic_skip) wd = &gs.at(m.params, block_name(layer, "w_d"));
    sg.W_D = wd;
    s6_backward(s6p, c.m.data(), c.s6, dy_ssm.data(), dm.data(), sg);
    // a_ln stores log A_log: chain through the exp
    auto& ga = gs.at(m.params, block_name(layer, "a_ln"));
    for (std::size_t i = 0; i < dAlog.size(); ++i) ga[i] += dAlog[i] * s6p.A_log[i];
  }

  std::vector<double> dconv(nD);
  for (std::size_t i = 0; i < nD; ++i) dconv[i] = dm[i] * silu_grad(c.conv_pre[i]);

  const auto& conv_w = m.params.at(block_name(layer, "conv_w")).v;
  auto& gconv_w = gs.at(m.params, block_name(layer, "conv_w"));
  auto& gconv_b = gs.at(m.params, block_name(layer, "conv_b"));
  std::vector<double> du_main(nD, 0.0);
  for (int i = 0; i < len; ++i) {
    const double* dc = dconv.data() + static_cast<std::size_t>(i) * D;
    for (int ch = 0; ch < D; ++ch) {
      const double dv = dc[ch];
      if (dv == 0.0) continue;
      gconv_b[ch] += dv;
      const double* w = conv_w.data() + static_cast<std::size_t>(ch) * k;
      double* wg = gconv_w.data() + static_cast<std::size_t>(ch) * k;
      for (int t = 0; t < k; ++t) {
        const int src = i - (k - 1) + t;
        if (src >= 0) {
          wg[t] += dv * c.u_main[static_cast<std::size_t>(src) * D + ch];
          du_main[static_cast<std::size_t>(src) * D + ch] += dv * w[t];
        }
      }
    }
  }

  std::vector<double> dU(static_cast<std::size_t>(len) * 2 * D);
  for (int i = 0; i < len; ++i) {
    std::memcpy(dU.data() + static_cast<std::size_t>(i) * 2 * D, du_main.data() + static_cast<std::size_t>(i) * D,
                sizeof(double) * D);
    std::memcpy(dU.data() + static_cast<std::size_t>(i) * 2 * D + D,
                du_gate.data() + static_cast<std::size_t>(i) * D, sizeof(double) * D);
  }

  const auto& W_in = m.params.at(block_name(layer, "in_proj")).v;
  std::vector<double> dxn(nd, 0.0);
  gemm_nn(dU.data(), W_in.data(), dxn.data(), len, 2 * D, d);
  gemm_tn(dU.data(), c.xn.data(), gs.at(m.params, block_name(layer, "in_proj")).data(), len, 2 * D, d);

  const auto& gamma = m.params.at(block_name(layer, "norm")).v;
  rms_backward(c.x_in.data(), len, d, gamma.data(), c.rms_inv.data(), dxn.data(), dx_in,
               gs.at(m.params, block_name(layer, "norm")).data());
}

// ---- head ----

void head_forward(const Model& m, const double* x, int len, HeadCache& c) {
  const int d = m.cfg.d_e, H = m.cfg.head_hidden, K = m.cfg.classes;
  c.pooled.assign(2 * d, 0.0);
  c.max_arg.assign(d, 0);
  for (int i = 0; i < len; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * d;
    for (int f = 0; f < d; ++f) {
      c.pooled[f] += xi[f];
      if (i == 0 || xi[f] > c.pooled[d + f]) {
        c.pooled[d + f] = xi[f];
        c.max_arg[f] = i;
      }
    }
  }
  for (int f = 0; f < d; ++f) c.pooled[f] /= static_cast<double>(len);

  const auto& W1 = m.params.at("head.l1.w").v;
  const auto& b1 = m.params.at("head.l1.b").v;
  const auto& W2 = m.params.at("head.l2.w").v;
  const auto& b2 = m.params.at("head.l2.b").v;
  const auto& W3 = m.params.at("head.l3.w").v;
  const auto& b3 = m.params.at("head.l3.b").v;

  c.h1_pre = b1;
  matvec(W1.data(), c.pooled.data(), c.h1_pre.data(), H, 2 * d);
  c.h1.resize(H);
  for (int q = 0; q < H; ++q) c.h1[q] = silu(c.h1_pre[q]);
  c.h2_pre = b2;
  matvec(W2.data(), c.h1.data(), c.h2_pre.data(), H, H);
  c.h2.resize(H);
  for (int q = 0; q < H; ++q) c.h2[q] = silu(c.h2_pre[q]);
  c.logits = b3;
  matvec(W3.data(), c.h2.data(), c.logits.data(), K, H);
}

void head_backward(const Model& m, const HeadCache& c, int len, const std::vector<double>& dlogits,
                   double* dx, GradSet& gs) {
  const int d = m.cfg.d_e, H = m.cfg.head_hidden, K = m.cfg.classes;
  const auto& W2 = m.params.at("head.l2.w").v;
  const auto& W3 = m.params.at("head.l3.w").v;
  const auto& W1 = m.params.at("head.l1.w").v;
  auto& gW1 = gs.at(m.params, "head.l1.w");
  auto& gb1 = gs.at(m.params, "head.l1.b");
  auto& gW2 = gs.at(m.params, "head.l2.w");
  auto& gb2 = gs.at(m.params, "head.l2.b");
  auto& gW3 = gs.at(m.params, "head.l3.w");
  auto& gb3 = gs.at(m.params, "head.l3.b");

  std::vector<double> dh2(H, 0.0);
  for (int j = 0; j < K; ++j) {
    const double dv = dlogits[j];
    if (dv == 0.0) continue;
    gb3[j] += dv;
    double* wg = gW3.data() + static_cast<std::size_t>(j) * H;
    const double* w = W3.data() + static_cast<std::size_t>(j) * H;
    for (int q = 0; q < H; ++q) {
      wg[q] += dv * c.h2[q];
      dh2[q] += dv * w[q];
    }
  }
  std::vector<double> dh1(H, 0.0);
  for (int q = 0; q < H; ++q) {
    const double dv = dh2[q] * silu_grad(c.h2_pre[q]);
    if (dv == 0.0) continue;
    gb2[q] += dv;
    double* wg = gW2.data() + static_cast<std::size_t>(q) * H;
    const double* w = W2.data() + static_cast<std::size_t>(q) * H;
    for (int r2 = 0; r2 < H; ++r2) {
      wg[r2] += dv * c.h1[r2];
      dh1[r2] += dv * w[r2];
    }
  }
  std::vector<double> dpooled(2 * d, 0.0);
  for (int q = 0; q < H; ++q) {
    const double dv = dh1[q] * silu_grad(c.h1_pre[q]);
    if (dv == 0.0) continue;
    gb1[q] += dv;
    double* wg = gW1.data() + static_cast<std::size_t>(q) * 2 * d;
    const double* w = W1.data() + static_cast<std::size_t>(q) * 2 * d;
    for (int f = 0; f < 2 * d; ++f) {
      wg[f] += dv * c.pooled[f];
      dpooled[f] += dv * w[f];
    }
  }
  const double invn = 1.0 / static_cast<double>(len);
  for (int i = 0; i < len; ++i) {
    double* dxi = dx + static_cast<std::size_t>(i) * d;
    for (int f = 0; f < d; ++f) dxi[f] += dpooled[f] * invn;
  }
  for (int f = 0; f < d; ++f) dx[static_cast<std::size_t>(c.max_arg[f]) * d + f] += dpooled[d + f];
}

bool all_finite(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

}  // namespace

// ---- public surface ----

SequenceBatch embed_patches(const Model& m, const PatchSet& ps) {
  PatchEncCache c;
  patch_encode_forward(m, ps, c);
  SequenceBatch out(1, ps.n_c(), m.cfg.d_e);
  std::copy(c.tokens.begin(), c.tokens.end(), out.data.begin());
  return out;
}

SequenceBatch embed_centers(const Model& m, const std::vector<Point3>& centers) {
  CenterEncCache c;
  center_encode_forward(m, centers, c);
  SequenceBatch out(1, static_cast<int>(centers.size()), m.cfg.d_e);
  std::copy(c.out.begin(), c.out.end(), out.data.begin());
  return out;
}

SequenceBatch encoder_forward(const Model& m, const SequenceBatch& tokens) {
  if (tokens.width != m.cfg.d_e) throw std::invalid_argument("width mismatch");
  const auto s6 = m.build_s6();
  SequenceBatch out(tokens.batch, tokens.len, tokens.width);
  const int len = tokens.len, d = m.cfg.d_e;
  for (int b = 0; b < tokens.batch; ++b) {
    std::vector<double> x(tokens.row(b, 0), tokens.row(b, 0) + static_cast<std::size_t>(len) * d);
    std::vector<double> y(static_cast<std::size_t>(len) * d);
    BlockCache cache;
    for (int l = 0; l < m.cfg.layers; ++l) {
      block_forward(m, l, s6[l], x.data(), len, cache, y.data());
      if (!all_finite(y.data(), y.size()))
        throw std::runtime_error("numerical overflow at layer " + std::to_string(l));
      x.swap(y);
    }
    std::vector<double> rinv(len);
    rms_forward(x.data(), len, d, m.params.at("final_norm").v.data(), out.row(b, 0), rinv.data());
  }
  return out;
}

std::vector<double> classify(const Model& m, const SequenceBatch& encoded, int batch_item) {
  if (encoded.width != m.cfg.d_e) throw std::invalid_argument("width mismatch");
  if (encoded.len < 1) throw std::invalid_argument("empty sequence");
  HeadCache c;
  head_forward(m, encoded.row(batch_item, 0), encoded.len, c);
  return c.logits;
}

std::vector<double> forward_sample(const Model& m, const std::vector<S6Params>& s6,
                                   const PatchSet& patches, const Serialization& order,
                                   ForwardCache& cache) {
  const int d = m.cfg.d_e;
  patch_encode_forward(m, patches, cache.patch);
  cache.tokens = cache.patch.tokens;
  if (m.cfg.use_positional_embedding) {
    center_encode_forward(m, patches.centers, cache.center);
    for (std::size_t i = 0; i < cache.tokens.size(); ++i) cache.tokens[i] += cache.center.out[i];
  }
  cache.order = order;
  const int N = static_cast<int>(order.order.size());
  cache.seq_len = N;
  cache.x0.resize(static_cast<std::size_t>(N) * d);
  for (int i = 0; i < N; ++i) {
    const int src = order.order[i];
    if (src < 0 || src >= patches.n_c()) throw std::out_of_range("order index out of range");
    std::memcpy(cache.x0.data() + static_cast<std::size_t>(i) * d,
                cache.tokens.data() + static_cast<std::size_t>(src) * d, sizeof(double) * d);
  }

  cache.blocks.resize(m.cfg.layers);
  std::vector<double> x = cache.x0;
  std::vector<double> y(x.size());
  for (int l = 0; l < m.cfg.layers; ++l) {
    block_forward(m, l, s6[l], x.data(), N, cache.blocks[l], y.data());
    if (!all_finite(y.data(), y.size()))
      throw std::runtime_error("numerical overflow at layer " + std::to_string(l));
    x.swap(y);
  }
  cache.x_pre_norm = x;
  cache.x_norm.resize(x.size());
  cache.final_rms_inv.resize(N);
  rms_forward(x.data(), N, d, m.params.at("final_norm").v.data(), cache.x_norm.data(),
              cache.final_rms_inv.data());
  head_forward(m, cache.x_norm.data(), N, cache.head);
  return cache.head.logits;
}

void backward_sample(const Model& m, const std::vector<S6Params>& s6, const PatchSet& patches,
                     const ForwardCache& cache, const std::vector<double>& dlogits, GradSet& gs) {
  const int d = m.cfg.d_e, N = cache.seq_len;
  std::vector<double> dxn(static_cast<std::size_t>(N) * d, 0.0);
  head_backward(m, cache.head, N, dlogits, dxn.data(), gs);

  std::vector<double> dx(static_cast<std::size_t>(N) * d, 0.0);
  rms_backward(cache.x_pre_norm.data(), N, d, m.params.at("final_norm").v.data(),
               cache.final_rms_inv.data(), dxn.data(), dx.data(),
               gs.at(m.params, "final_norm").data());

  std::vector<double> dprev(static_cast<std::size_t>(N) * d);
  for (int l = m.cfg.layers - 1; l >= 0; --l) {
    std::fill(dprev.begin(), dprev.end(), 0.0);
    block_backward(m, l, s6[l], cache.blocks[l], dx.data(), dprev.data(), gs);
    dx.swap(dprev);
  }

  // scatter back through the serialization (axis-triple visits a token 3x)
  std::vector<double> dtokens(cache.tokens.size(), 0.0);
  for (int i = 0; i < N; ++i) {
    const int src = cache.order.order[i];
    const double* s = dx.data() + static_cast<std::size_t>(i) * d;
    double* t = dtokens.data() + static_cast<std::size_t>(src) * d;
    for (int c = 0; c < d; ++c) t[c] += s[c];
  }

  if (m.cfg.use_positional_embedding)
    center_encode_backward(m, patches.centers, cache.center, dtokens.data(), gs);
  patch_encode_backward(m, patches, cache.patch, dtokens.data(), gs);
}

double cross_entropy(const std::vector<double>& logits, int label, std::vector<double>* probs) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw std::invalid_argument("label out of range");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  if (probs) {
    probs->resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) (*probs)[j] = std::exp(logits[j] - lse);
  }
  return lse - logits[label];
}

double loss_and_grad(const Model& m, const std::vector<PreppedSample>& batch, GradSet& gs,
                     std::vector<int>* predictions) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw std::invalid_argument("empty batch");
  const auto s6 = m.build_s6();

  std::vector<GradSet> slots(B);
  std::vector<double> losses(B, 0.0);
  std::vector<int> preds(B, -1);
  std::string error;
  bool failed = false;

#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < B; ++s) {
    try {
      slots[s].init_like(m.params);
      ForwardCache cache;
      const auto logits = forward_sample(m, s6, batch[s].patches, batch[s].order, cache);
      std::vector<double> probs;
      losses[s] = cross_entropy(logits, batch[s].label, &probs);
      preds[s] = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      std::vector<double> dlogits(probs);
      dlogits[batch[s].label] -= 1.0;
      for (double& v : dlogits) v /= static_cast<double>(B);
      backward_sample(m, s6, batch[s].patches, cache, dlogits, slots[s]);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        error = e.what();
      }
    }
  }
  if (failed) throw std::runtime_error(error);

  for (int s = 0; s < B; ++s) gs.add_scaled(slots[s], 1.0);
  double loss = 0.0;
  for (int s = 0; s < B; ++s) loss += losses[s];
  loss /= static_cast<double>(B);
  if (predictions) *predictions = preds;
  return loss;
}

PreppedSample prep_sample(const PointCloud& cloud, int label, const ModelConfig& cfg) {
  PreppedSample out;
  out.label = label;
  const PointCloud normed = normalize(cloud);
  const FpsResult fps = farthest_point_sampling(normed, cfg.n_c);
  out.patches = knn_group(normed, fps, cfg.n_p);
  out.order = make_order(fps.centers, cfg.ordering, cfg.r, cfg.nimba_candidate);
  return out;
}

std::vector<double> model_logits(const Model& m, const PointCloud& cloud) {
  const PreppedSample s = prep_sample(cloud, 0, m.cfg);
  ForwardCache cache;
  const auto s6 = m.build_s6();
  return forward_sample(m, s6, s.patches, s.order, cache);
}

// ---- config text round trip ----

std::string config_to_string(const ModelConfig& c) {
  std::ostringstream os;
  os << "d_e=" << c.d_e << "\nlayers=" << c.layers << "\nn_points=" << c.n_points
     << "\nn_c=" << c.n_c << "\nn_p=" << c.n_p
     << "\nuse_positional_embedding=" << (c.use_positional_embedding ? 1 : 0)
     << "\nordering=" << to_string(c.ordering) << "\nr=" << c.r
     << "\nnimba_candidate=" << (c.nimba_candidate == NimbaCandidate::First ? "first" : "nearest")
     << "\nexpand=" << c.expand << "\nconv_kernel=" << c.conv_kernel
     << "\nstate_size=" << c.state_size << "\nclasses=" << c.classes
     << "\npatch_hidden=" << c.patch_hidden << "\ncenter_hidden=" << c.center_hidden
     << "\nhead_hidden=" << c.head_hidden << "\nquadratic_skip=" << (c.quadratic_skip ? 1 : 0)
     << "\n";
  return os.str();
}

ModelConfig config_from_string(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "d_e") c.d_e = std::stoi(val);
    else if (key == "layers") c.layers = std::stoi(val);
    else if (key == "n_points") c.n_points = std::stoi(val);
    else if (key == "n_c") c.n_c = std::stoi(val);
    else if (key == "n_p") c.n_p = std::stoi(val);
    else if (key == "use_positional_embedding") c.use_positional_embedding = val != "0";
    else if (key == "ordering") c.ordering = ordering_from_string(val);
    else if (key == "r") c.r = std::stod(val);
    else if (key == "nimba_candidate")
      c.nimba_candidate = val == "nearest" ? NimbaCandidate::Nearest : NimbaCandidate::First;
    else if (key == "expand") c.expand = std::stoi(val);
    else if (key == "conv_kernel") c.conv_kernel = std::stoi(val);
    else if (key == "state_size") c.state_size = std::stoi(val);
    else if (key == "classes") c.classes = std::stoi(val);
    else if (key == "patch_hidden") c.patch_hidden = std::stoi(val);
    else if (key == "center_hidden") c.center_hidden = std::stoi(val);
    else if (key == "head_hidden") c.head_hidden = std::stoi(val);
    else if (key == "quadratic_skip") c.quadratic_skip = val != "0";
    else throw std::invalid_argument("unknown config key: " + key);
  }
  return c;
}

}  // namespace pointseq
