#include "pointseq/bench.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "pointseq/datagen.hpp"
#include "pointseq/geometry.hpp"
#include "pointseq/reference.hpp"
#include "pointseq/rng.hpp"
#include "pointseq/ssm.hpp"

namespace pointseq {

namespace {

struct Timing {
  double median_ms = 0.0;
  double iqr_ms = 0.0;
};

Timing time_fn(const std::function<void()>& fn, int repeats, int inner) {
  fn();  // warmup
  std::vector<double> samples(repeats);
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < inner; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    samples[r] = std::chrono::duration<double, std::milli>(t1 - t0).count() / inner;
  }
  std::sort(samples.begin(), samples.end());
  Timing t;
  t.median_ms = samples[repeats / 2];
  t.iqr_ms = samples[(3 * repeats) / 4] - samples[repeats / 4];
  return t;
}

SequenceBatch random_batch(int len, int width, std::uint64_t seed) {
  Rng rng(seed);
  SequenceBatch X(1, len, width);
  for (double& v : X.data) v = rng.normal();
  return X;
}

class ThreadPin {
 public:
  explicit ThreadPin(int n) : saved_(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadPin() { omp_set_num_threads(saved_); }

 private:
  int saved_;
};

}  // namespace

BenchResult run_bench(const BenchConfig& cfg, MetricsWriter* mw) {
  BenchResult res;
  Json machine{{"omp_max_threads", omp_get_max_threads()},
               {"omp_procs", omp_get_num_procs()},
               {"sizeof_double", sizeof(double)}};

  // mixer scaling, one thread for comparability
  for (int width : cfg.widths) {
    const S6Params sp = S6Params::random(width, cfg.state_size, mix_seed(cfg.seed, width));
    const AttnParams ap = AttnParams::random(width, mix_seed(cfg.seed, width, 1));
    for (int len : cfg.lengths) {
      const SequenceBatch X = random_batch(len, width, mix_seed(cfg.seed, width, len));
      ThreadPin pin(1);
      MixerPoint pt;
      pt.width = width;
      pt.len = len;
      const Timing ts = time_fn([&] { volatile double v = s6_scan(sp, X).data[0]; (void)v; },
                                cfg.repeats, cfg.inner);
      const Timing ta = time_fn([&] { volatile double v = sdpa(ap, X, false).data[0]; (void)v; },
                                cfg.repeats, cfg.inner);
      pt.s6_ms = ts.median_ms;
      pt.s6_iqr = ts.iqr_ms;
      pt.attn_ms = ta.median_ms;
      pt.attn_iqr = ta.iqr_ms;
      res.mixer.push_back(pt);
      if (mw)
        mw->write(Json{{"cmd", "bench"},  {"record", "mixer"},   {"machine", machine},
                       {"width", width},  {"len", len},          {"s6_ms", pt.s6_ms},
                       {"s6_iqr", pt.s6_iqr}, {"attn_ms", pt.attn_ms}, {"attn_iqr", pt.attn_iqr}});
    }

    // sequence replication cost: n_c vs 3*n_c
    {
      const SequenceBatch Xn = random_batch(cfg.n_c, width, mix_seed(cfg.seed, width, 3));
      const SequenceBatch X3n = random_batch(3 * cfg.n_c, width, mix_seed(cfg.seed, width, 4));
      ThreadPin pin(1);
      TripleCmp tc;
      tc.width = width;
      tc.n_c = cfg.n_c;
      tc.t_n_ms = time_fn([&] { volatile double v = s6_scan(sp, Xn).data[0]; (void)v; },
                          cfg.repeats, cfg.inner).median_ms;
      tc.t_3n_ms = time_fn([&] { volatile double v = s6_scan(sp, X3n).data[0]; (void)v; },
                           cfg.repeats, cfg.inner).median_ms;
      res.triple.push_back(tc);
      if (mw)
        mw->write(Json{{"cmd", "bench"}, {"record", "triple"}, {"machine", machine},
                       {"width", width}, {"n_c", cfg.n_c},     {"t_n_ms", tc.t_n_ms},
                       {"t_3n_ms", tc.t_3n_ms}});
    }
  }

  if (cfg.kernels) {
    const int threads = omp_get_max_threads();
    const int N = 4096, n_c = 256, n_p = 32;
    const PointCloud cloud = gen_shape(ShapeKind::Sphere, N, mix_seed(cfg.seed, 0xB1));

    {
      KernelCmp kc{"fps", N, threads, 0.0, 0.0};
      {
        ThreadPin pin(1);
        kc.serial_ms = time_fn([&] { volatile double v = reference::fps_bruteforce(cloud, n_c).centers[0].x; (void)v; },
                               std::max(3, cfg.repeats / 2), 1).median_ms;
      }
      kc.parallel_ms = time_fn([&] { volatile double v = farthest_point_sampling(cloud, n_c).centers[0].x; (void)v; },
                               cfg.repeats, cfg.inner).median_ms;
      res.kernels.push_back(kc);
    }
    {
      const FpsResult fps = farthest_point_sampling(cloud, n_c);
      KernelCmp kc{"knn", N, threads, 0.0, 0.0};
      {
        ThreadPin pin(1);
        kc.serial_ms =
            time_fn([&] { volatile double v = reference::knn_fullsort(cloud, fps.centers, fps.center_indices, n_p).patches[0][0].x; (void)v; },
                    cfg.repeats, cfg.inner).median_ms;
      }
      kc.parallel_ms = time_fn([&] { volatile double v = knn_group(cloud, fps, n_p).patches[0][0].x; (void)v; },
                               cfg.repeats, cfg.inner).median_ms;
      res.kernels.push_back(kc);
    }
    {
      const int width = cfg.widths.back();
      const S6Params sp = S6Params::random(width, cfg.state_size, mix_seed(cfg.seed, 0xB2));
      Rng rng(mix_seed(cfg.seed, 0xB3));
      SequenceBatch X(8, 256, width);
      for (double& v : X.data) v = rng.normal();
      KernelCmp kc{"s6_batch", 8 * 256, threads, 0.0, 0.0};
      {
        ThreadPin pin(1);
        kc.serial_ms = time_fn([&] { volatile double v = reference::s6_scan_serial(sp, X).data[0]; (void)v; },
                               cfg.repeats, cfg.inner).median_ms;
      }
      kc.parallel_ms = time_fn([&] { volatile double v = s6_scan(sp, X).data[0]; (void)v; },
                               cfg.repeats, cfg.inner).median_ms;
      res.kernels.push_back(kc);
    }
    if (mw)
      for (const KernelCmp& kc : res.kernels)
        mw->write(Json{{"cmd", "bench"},     {"record", "kernel"},       {"machine", machine},
                       {"kernel", kc.kernel}, {"n", kc.n},               {"threads", kc.threads},
                       {"serial_ms", kc.serial_ms}, {"parallel_ms", kc.parallel_ms}});
  }

  return res;
}

}  // namespace pointseq
