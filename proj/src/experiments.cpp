#include "pointseq/experiments.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pointseq/io.hpp"
#include "pointseq/rng.hpp"

namespace pointseq {

std::vector<std::uint64_t> default_seeds() { return {0, 123, 777}; }

DatasetSplits DataSource::load(const ModelConfig& cfg, std::uint64_t seed) const {
  if (synthetic) {
    DatasetSpec s = synth;
    s.n_points = cfg.n_points;
    s.classes = cfg.classes;
    return make_dataset(s, mix_seed(seed, 0xDA7A));
  }
  DatasetSplits out;
  out.train = load_dataset_dir(dir, "train", cfg.n_points, mix_seed(seed, 0xDA7A, 1));
  out.test = load_dataset_dir(dir, "test", cfg.n_points, mix_seed(seed, 0xDA7A, 2));
  return out;
}

RunOutcome run_experiment(const RunSpec& spec, MetricsWriter* mw, std::vector<Json>* record_sink) {
  spec.model.validate();
  const DatasetSplits data = spec.data.load(spec.model, spec.train.seed);

  RunOutcome out;
  out.model = Model::init(spec.model, mix_seed(spec.train.seed, 0x1217));

  NoiseHooks hooks;
  PerturbSpec noise = spec.noise;
  if (noise.kind != PerturbKind::None) {
    hooks.train_noise = &noise;
    hooks.test_noise = &noise;
  }

  const Json common{{"cmd", "train"},
                    {"tag", spec.tag},
                    {"config", config_to_json(spec.model)},
                    {"train_config", train_config_to_json(spec.train)},
                    {"noise",
                     Json{{"kind", to_string(noise.kind)},
                          {"apply_to", to_string(noise.apply_to)},
                          {"sigma", noise.sigma},
                          {"clip", noise.clip},
                          {"p", noise.p},
                          {"flip_prob", noise.flip_prob}}}};

  auto emit = [&](Json rec) {
    for (auto& [k, v] : common.items()) rec[k] = v;
    if (record_sink) record_sink->push_back(std::move(rec));
    else if (mw) mw->write(std::move(rec));
  };

  auto on_epoch = [&](const EpochMetrics& em) {
    if (!mw && !record_sink) return;
    emit(Json{{"record", "epoch"},
              {"epoch", em.epoch},
              {"lr", em.lr},
              {"train_loss", em.train_loss},
              {"train_acc", em.train_acc},
              {"test_acc", std::isfinite(em.test_acc) ? Json(em.test_acc) : Json(nullptr)},
              {"wall_s", em.seconds}});
  };

  out.report = train_model(out.model, data.train, data.test, spec.train, hooks, on_epoch);
  out.final_test_acc = out.report.final_test_acc;

  emit(Json{{"record", "final"},
            {"final_test_acc", out.final_test_acc},
            {"diverged", out.report.diverged}});
  return out;
}

std::vector<RunOutcome> run_experiments(const std::vector<RunSpec>& specs, MetricsWriter* mw) {
  const int n = static_cast<int>(specs.size());
  std::vector<RunOutcome> outs(n);
  std::vector<std::vector<Json>> sinks(n);
  std::string error;
  bool failed = false;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      outs[i] = run_experiment(specs[i], nullptr, &sinks[i]);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        error = e.what();
      }
    }
  }
  if (failed) throw std::runtime_error(error);
  if (mw)
    for (auto& sink : sinks)
      for (auto& rec : sink) mw->write(std::move(rec));
  return outs;
}

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

AblationResult run_pe_ablation(const ModelConfig& base, const TrainConfig& train,
                               const DataSource& data, const std::vector<std::uint64_t>& seeds,
                               MetricsWriter* mw) {
  const OrderingStrategy orderings[2] = {OrderingStrategy::NimbaProximity,
                                         OrderingStrategy::AxisTriple};
  std::vector<RunSpec> specs;
  std::vector<AblationCell> cells;
  for (int o = 0; o < 2; ++o) {
    for (int pe = 0; pe < 2; ++pe) {
      for (std::uint64_t seed : seeds) {
        RunSpec spec;
        spec.model = base;
        spec.model.ordering = orderings[o];
        spec.model.use_positional_embedding = pe == 1;
        spec.train = train;
        spec.train.seed = seed;
        spec.data = data;
        spec.tag = "ablate-pe";
        specs.push_back(std::move(spec));
        cells.push_back(AblationCell{orderings[o], pe == 1, seed, 0.0});
      }
    }
  }

  const std::vector<RunOutcome> outs = run_experiments(specs, mw);

  AblationResult res;
  std::vector<double> accs[2][2];
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].acc = outs[i].final_test_acc;
    const int o = cells[i].ordering == OrderingStrategy::NimbaProximity ? 0 : 1;
    accs[o][cells[i].pe ? 1 : 0].push_back(cells[i].acc);
  }
  res.cells = std::move(cells);
  res.mean_acc_nimba_nope = mean(accs[0][0]);
  res.mean_acc_nimba_pe = mean(accs[0][1]);
  res.mean_acc_axis_nope = mean(accs[1][0]);
  res.mean_acc_axis_pe = mean(accs[1][1]);
  res.gap_nimba = res.mean_acc_nimba_pe - res.mean_acc_nimba_nope;
  res.gap_axis = res.mean_acc_axis_pe - res.mean_acc_axis_nope;

  if (mw) {
    for (int o = 0; o < 2; ++o)
      for (int pe = 0; pe < 2; ++pe)
        mw->write(Json{{"cmd", "ablate-pe"},
                       {"record", "cell"},
                       {"ordering", to_string(orderings[o])},
                       {"pe", pe == 1},
                       {"acc", mean(accs[o][pe])},
                       {"accs", accs[o][pe]},
                       {"gap", o == 0 ? res.gap_nimba : res.gap_axis}});
  }
  return res;
}

RobustnessResult run_robustness(const ModelConfig& base, const TrainConfig& train,
                                const DataSource& data, const std::vector<std::uint64_t>& full_seeds,
                                int cell_seeds, const PerturbSpec& magnitudes, MetricsWriter* mw) {
  if (full_seeds.empty()) throw std::invalid_argument("need at least one seed");
  cell_seeds = std::max(1, std::min<int>(cell_seeds, static_cast<int>(full_seeds.size())));
  const std::vector<std::uint64_t> few(full_seeds.begin(), full_seeds.begin() + cell_seeds);

  const OrderingStrategy orderings[2] = {OrderingStrategy::NimbaProximity,
                                         OrderingStrategy::AxisTriple};
  auto model_for = [&](OrderingStrategy o) {
    ModelConfig m = base;
    m.ordering = o;
    // each strategy in its published configuration: proximity reordering
    // runs without positional embeddings, axis-triple runs with them
    m.use_positional_embedding = o == OrderingStrategy::AxisTriple;
    return m;
  };

  struct CellPlan {
    PerturbKind kind;
    ApplyTo apply_to;
    OrderingStrategy ordering;
    std::vector<std::uint64_t> seeds;
    bool baseline = false;
  };
  std::vector<CellPlan> plans;
  for (int o = 0; o < 2; ++o)
    plans.push_back(CellPlan{PerturbKind::None, ApplyTo::Both, orderings[o], full_seeds, true});
  const PerturbKind kinds[5] = {PerturbKind::Rotation, PerturbKind::RHF, PerturbKind::Jitter,
                                PerturbKind::RID, PerturbKind::All};
  const ApplyTo applies[3] = {ApplyTo::Train, ApplyTo::Test, ApplyTo::Both};
  for (PerturbKind kind : kinds)
    for (ApplyTo apply : applies)
      for (int o = 0; o < 2; ++o) {
        const bool trend_cell = kind == PerturbKind::Rotation && apply == ApplyTo::Test;
        plans.push_back(CellPlan{kind, apply, orderings[o], trend_cell ? full_seeds : few, false});
      }

  std::vector<RunSpec> specs;
  std::vector<std::pair<int, int>> run_to_cell;  // (cell index, seed slot)
  for (std::size_t ci = 0; ci < plans.size(); ++ci) {
    const CellPlan& plan = plans[ci];
    for (std::size_t si = 0; si < plan.seeds.size(); ++si) {
      RunSpec spec;
      spec.model = model_for(plan.ordering);
      spec.train = train;
      spec.train.seed = plan.seeds[si];
      spec.data = data;
      spec.noise = magnitudes;
      spec.noise.kind = plan.kind;
      spec.noise.apply_to = plan.apply_to;
      spec.tag = "robustness";
      specs.push_back(std::move(spec));
      run_to_cell.emplace_back(static_cast<int>(ci), static_cast<int>(si));
    }
  }

  const std::vector<RunOutcome> outs = run_experiments(specs, mw);

  std::vector<RobustnessCell> results(plans.size());
  for (std::size_t ci = 0; ci < plans.size(); ++ci) {
    results[ci].kind = plans[ci].kind;
    results[ci].apply_to = plans[ci].apply_to;
    results[ci].ordering = plans[ci].ordering;
    results[ci].accs.resize(plans[ci].seeds.size());
  }
  for (std::size_t ri = 0; ri < specs.size(); ++ri)
    results[run_to_cell[ri].first].accs[run_to_cell[ri].second] = outs[ri].final_test_acc;

  RobustnessResult res;
  for (std::size_t ci = 0; ci < plans.size(); ++ci) {
    results[ci].mean_acc = mean(results[ci].accs);
    if (mw)
      mw->write(Json{{"cmd", "robustness"},
                     {"record", "cell"},
                     {"noise", plans[ci].baseline ? "none" : to_string(plans[ci].kind)},
                     {"apply_to", to_string(plans[ci].apply_to)},
                     {"ordering", to_string(plans[ci].ordering)},
                     {"accs", results[ci].accs},
                     {"mean_acc", results[ci].mean_acc}});
    if (plans[ci].baseline) res.baselines.push_back(results[ci]);
    else res.cells.push_back(results[ci]);
  }
  res.baseline_nimba = res.baselines[0].mean_acc;
  res.baseline_axis = res.baselines[1].mean_acc;
  for (const RobustnessCell& c : res.cells) {
    if (c.kind == PerturbKind::Rotation && c.apply_to == ApplyTo::Test) {
      if (c.ordering == OrderingStrategy::NimbaProximity) res.rot_test_nimba = c.mean_acc;
      else res.rot_test_axis = c.mean_acc;
    }
  }
  res.drop_nimba = res.baseline_nimba - res.rot_test_nimba;
  res.drop_axis = res.baseline_axis - res.rot_test_axis;

  if (mw)
    mw->write(Json{{"cmd", "robustness"},
                   {"record", "summary"},
                   {"baseline_nimba", res.baseline_nimba},
                   {"baseline_axis_triple", res.baseline_axis},
                   {"rotation_test_nimba", res.rot_test_nimba},
                   {"rotation_test_axis_triple", res.rot_test_axis},
                   {"drop_nimba", res.drop_nimba},
                   {"drop_axis_triple", res.drop_axis}});
  return res;
}

}  // namespace pointseq
