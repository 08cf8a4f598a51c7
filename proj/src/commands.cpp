#include "pointseq/commands.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "pointseq/io.hpp"
#include "pointseq/rng.hpp"

namespace pointseq {

namespace {

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace

int cmd_reorder(const ReorderOptions& opt) {
  try {
    const PointCloud raw = load_cloud(opt.input, opt.n_points, opt.seed);
    const PointCloud cloud = normalize(raw);
    const int n_c = std::min<int>(opt.n_c, static_cast<int>(cloud.size()));
    const FpsResult fps = farthest_point_sampling(cloud, n_c);
    const OrderingStrategy strategy = ordering_from_string(opt.strategy);
    const NimbaCandidate cand =
        opt.candidate == "nearest" ? NimbaCandidate::Nearest : NimbaCandidate::First;
    const Serialization s = make_order(fps.centers, strategy, opt.r, cand);

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!opt.output.empty() && opt.output != "-") {
      file.open(opt.output);
      if (!file) throw std::runtime_error("cannot open " + opt.output + " for writing");
      os = &file;
    }

    *os << "# strategy=" << to_string(strategy) << " r=" << opt.r << " n_c=" << n_c
        << " seq_len=" << s.order.size() << "\n";
    *os << "# columns: seq_pos center_index x y z dist_to_prev\n";
    int within = 0;
    char buf[256];
    for (std::size_t i = 0; i < s.order.size(); ++i) {
      const Point3& c = fps.centers[s.order[i]];
      double dist = 0.0;
      if (i > 0) {
        dist = std::sqrt(sq_dist(fps.centers[s.order[i - 1]], c));
        if (dist < opt.r) ++within;
      }
      std::snprintf(buf, sizeof(buf), "%zu %d %.17g %.17g %.17g %.17g\n", i, s.order[i], c.x, c.y,
                    c.z, dist);
      *os << buf;
    }
    const double frac = s.order.size() > 1
                            ? static_cast<double>(within) / static_cast<double>(s.order.size() - 1)
                            : 1.0;
    std::cerr << "sequence length " << s.order.size() << " (replication " << s.replication
              << "), adjacent pairs within r: " << frac << "\n";

    MetricsWriter mw(opt.metrics_out);
    mw.write(Json{{"cmd", "reorder"},
                  {"record", "summary"},
                  {"input", opt.input},
                  {"strategy", to_string(strategy)},
                  {"r", opt.r},
                  {"n_c", n_c},
                  {"seq_len", s.order.size()},
                  {"replication", s.replication},
                  {"frac_adjacent_within_r", frac},
                  {"seed", opt.seed}});
    return kExitOk;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

ModelConfig ExperimentOptions::model_config() const {
  ModelConfig m = ModelConfig::preset(preset);
  m.ordering = ordering_from_string(ordering);
  m.use_positional_embedding = pe;
  m.r = r;
  m.nimba_candidate = candidate == "nearest" ? NimbaCandidate::Nearest : NimbaCandidate::First;
  if (d_e > 0) m.d_e = d_e;
  if (layers >= 0) m.layers = layers;
  if (n_c > 0) m.n_c = n_c;
  if (n_p > 0) m.n_p = n_p;
  if (n_points > 0) m.n_points = n_points;
  if (classes > 0) m.classes = classes;
  return m;
}

TrainConfig ExperimentOptions::train_config() const {
  TrainConfig t = TrainConfig::preset(preset);
  if (epochs >= 0) t.epochs = epochs;
  if (batch > 0) t.batch_size = batch;
  if (warmup >= 0) t.warmup_epochs = warmup;
  if (lr >= 0.0) t.lr = lr;
  if (weight_decay >= 0.0) t.weight_decay = weight_decay;
  t.seed = seed;
  return t;
}

DataSource ExperimentOptions::data_source() const {
  DataSource d;
  if (!data_dir.empty()) {
    d.synthetic = false;
    d.dir = data_dir;
  } else {
    d.synthetic = true;
    d.synth.per_class = per_class;
    d.synth.random_pose = random_pose;
  }
  return d;
}

PerturbSpec ExperimentOptions::perturb_spec() const {
  PerturbSpec s;
  s.kind = perturb_from_string(perturb);
  s.apply_to = apply_to_from_string(apply_to);
  s.sigma = sigma;
  s.clip = clip;
  s.p = p;
  return s;
}

int cmd_train(const ExperimentOptions& opt) {
  set_threads(opt.threads);
  try {
    RunSpec spec;
    spec.model = opt.model_config();
    spec.train = opt.train_config();
    spec.data = opt.data_source();
    spec.noise = opt.perturb_spec();
    spec.tag = "train";

    MetricsWriter mw(opt.metrics_out);
    const RunOutcome out = run_experiment(spec, &mw);
    if (out.report.diverged) {
      std::cerr << "training diverged at epoch " << out.report.diverged_epoch << "\n";
      return kExitDiverged;
    }
    if (!opt.ckpt_out.empty()) save_checkpoint(opt.ckpt_out, out.model);
    std::cout << "final test accuracy " << out.final_test_acc << " (seq len "
              << spec.model.seq_len() << ")\n";
    return kExitOk;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  }
}

int cmd_eval(const ExperimentOptions& opt) {
  set_threads(opt.threads);
  try {
    if (opt.ckpt_in.empty()) {
      std::cerr << "error: eval requires --ckpt\n";
      return kExitUsage;
    }
    const Model model = load_checkpoint(opt.ckpt_in);
    DataSource data = opt.data_source();
    const DatasetSplits splits = data.load(model.cfg, opt.seed);
    PerturbSpec noise = opt.perturb_spec();
    const bool use_noise = noise.kind != PerturbKind::None &&
                           (noise.apply_to == ApplyTo::Test || noise.apply_to == ApplyTo::Both);
    const double acc = evaluate(model, splits.test, use_noise ? &noise : nullptr, opt.seed);
    MetricsWriter mw(opt.metrics_out);
    mw.write(Json{{"cmd", "eval"},
                  {"record", "final"},
                  {"config", config_to_json(model.cfg)},
                  {"noise", to_string(noise.kind)},
                  {"apply_to", to_string(noise.apply_to)},
                  {"seed", opt.seed},
                  {"test_acc", acc}});
    std::cout << "test accuracy " << acc << "\n";
    return kExitOk;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int cmd_ablate_pe(const ExperimentOptions& opt) {
  set_threads(opt.threads);
  try {
    const std::vector<std::uint64_t> seeds = opt.seeds.empty() ? default_seeds() : opt.seeds;
    MetricsWriter mw(opt.metrics_out);
    TrainConfig tc = opt.train_config();
    tc.eval_every_epoch = false;  // grids only need the final accuracy
    const AblationResult res = run_pe_ablation(opt.model_config(), tc, opt.data_source(), seeds, &mw);
    std::printf("%-12s %-4s %8s\n", "ordering", "pe", "acc");
    for (const AblationCell& c : res.cells)
      std::printf("%-12s %-4s %8.4f  (seed %llu)\n", to_string(c.ordering).c_str(),
                  c.pe ? "on" : "off", c.acc, static_cast<unsigned long long>(c.seed));
    std::printf("gap (PE on - PE off): nimba %.4f, axis-triple %.4f\n", res.gap_nimba, res.gap_axis);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int cmd_robustness(const ExperimentOptions& opt) {
  set_threads(opt.threads);
  try {
    const std::vector<std::uint64_t> seeds = opt.seeds.empty() ? default_seeds() : opt.seeds;
    MetricsWriter mw(opt.metrics_out);
    TrainConfig tc = opt.train_config();
    tc.eval_every_epoch = false;
    const RobustnessResult res = run_robustness(opt.model_config(), tc, opt.data_source(), seeds,
                                                opt.cell_seeds, opt.perturb_spec(), &mw);
    std::printf("%-10s %-6s %-12s %8s\n", "noise", "apply", "ordering", "acc");
    for (const RobustnessCell& c : res.baselines)
      std::printf("%-10s %-6s %-12s %8.4f\n", "none", "-", to_string(c.ordering).c_str(), c.mean_acc);
    for (const RobustnessCell& c : res.cells)
      std::printf("%-10s %-6s %-12s %8.4f\n", to_string(c.kind).c_str(),
                  to_string(c.apply_to).c_str(), to_string(c.ordering).c_str(), c.mean_acc);
    std::printf("rotation/test drop: nimba %.4f, axis-triple %.4f\n", res.drop_nimba, res.drop_axis);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int cmd_bench(const BenchOptions& opt) {
  try {
    BenchConfig cfg;
    cfg.widths = opt.widths;
    cfg.lengths = opt.lengths;
    cfg.repeats = opt.repeats;
    cfg.inner = opt.inner;
    cfg.n_c = opt.n_c;
    cfg.kernels = !opt.no_kernels;
    cfg.seed = opt.seed;
    MetricsWriter mw(opt.metrics_out);
    const BenchResult res = run_bench(cfg, &mw);
    std::printf("%6s %6s %12s %12s\n", "width", "len", "s6_ms", "attn_ms");
    for (const MixerPoint& p : res.mixer)
      std::printf("%6d %6d %12.4f %12.4f\n", p.width, p.len, p.s6_ms, p.attn_ms);
    for (const TripleCmp& t : res.triple)
      std::printf("width %d: s6 @%d %.4f ms, @%d %.4f ms\n", t.width, t.n_c, t.t_n_ms, 3 * t.n_c,
                  t.t_3n_ms);
    for (const KernelCmp& k : res.kernels)
      std::printf("kernel %-9s n=%-6d serial %.3f ms, %d threads %.3f ms\n", k.kernel.c_str(), k.n,
                  k.serial_ms, k.threads, k.parallel_ms);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int cmd_check(const CheckCmdOptions& opt) {
  CheckOptions co;
  co.seed = opt.seed;
  co.quick = opt.quick;
  co.corrupt_a_log = opt.corrupt_a_log;
  const auto results = run_invariant_suite(co);
  int failures = 0;
  for (const CheckResult& r : results) {
    std::printf("[%s] %-42s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    if (!r.pass) ++failures;
  }
  std::printf("%zu checks, %d failed\n", results.size(), failures);
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace pointseq
