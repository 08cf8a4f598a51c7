#include <doctest.h>

#include <omp.h>

#include "pointseq/geometry.hpp"
#include "pointseq/nn.hpp"
#include "pointseq/reference.hpp"
#include "pointseq/rng.hpp"
#include "pointseq/ssm.hpp"

using namespace pointseq;

namespace {

PointCloud random_cloud(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {rng.normal(), rng.normal(), rng.normal()};
  return PointCloud::from_points(std::move(pts));
}

struct ThreadGuard {
  int saved;
  explicit ThreadGuard(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadGuard() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("fps kernel is exact against the serial reference at every thread count") {
  const PointCloud c = random_cloud(400, 1);
  const FpsResult want = reference::fps_bruteforce(c, 48);
  for (int threads : {1, 2, 3}) {
    ThreadGuard g(threads);
    CHECK(farthest_point_sampling(c, 48).center_indices == want.center_indices);
  }
}

TEST_CASE("knn kernel is exact against the serial reference at every thread count") {
  const PointCloud c = random_cloud(300, 2);
  const FpsResult fps = reference::fps_bruteforce(c, 20);
  const PatchSet want = reference::knn_fullsort(c, fps.centers, fps.center_indices, 12);
  for (int threads : {1, 2, 3}) {
    ThreadGuard g(threads);
    CHECK(knn_group(c, fps, 12).patch_indices == want.patch_indices);
  }
}

TEST_CASE("batched s6 scan is bit-identical across thread counts") {
  const S6Params p = S6Params::random(8, 6, 3);
  Rng rng(4);
  SequenceBatch X(6, 40, 8);
  for (double& v : X.data) v = rng.normal();
  const SequenceBatch want = reference::s6_scan_serial(p, X);
  for (int threads : {1, 2, 4}) {
    ThreadGuard g(threads);
    const SequenceBatch got = s6_scan(p, X);
    CHECK(got.data == want.data);
  }
}

TEST_CASE("batch gradients are bit-identical across thread counts") {
  ModelConfig cfg;
  cfg.d_e = 8;
  cfg.layers = 2;
  cfg.n_points = 32;
  cfg.n_c = 6;
  cfg.n_p = 5;
  cfg.patch_hidden = 10;
  cfg.center_hidden = 6;
  cfg.head_hidden = 12;
  cfg.state_size = 4;
  cfg.classes = 2;
  const Model m = Model::init(cfg, 5);
  std::vector<PreppedSample> batch;
  for (int i = 0; i < 6; ++i)
    batch.push_back(prep_sample(random_cloud(cfg.n_points, 10 + i), i % 2, cfg));

  GradSet g1;
  g1.init_like(m.params);
  double l1;
  {
    ThreadGuard g(1);
    l1 = loss_and_grad(m, batch, g1);
  }
  for (int threads : {2, 4}) {
    ThreadGuard g(threads);
    GradSet g2;
    g2.init_like(m.params);
    const double l2 = loss_and_grad(m, batch, g2);
    CHECK(l1 == l2);
    for (std::size_t i = 0; i < g1.g.size(); ++i) CHECK(g1.g[i] == g2.g[i]);
  }
}
