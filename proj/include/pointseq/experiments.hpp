#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointseq/datagen.hpp"
#include "pointseq/metrics.hpp"
#include "pointseq/nn.hpp"
#include "pointseq/perturb.hpp"
#include "pointseq/train.hpp"

namespace pointseq {

struct DataSource {
  bool synthetic = true;
  DatasetSpec synth;
  std::string dir;  // dataset directory when not synthetic

  DatasetSplits load(const ModelConfig& cfg, std::uint64_t seed) const;
};

struct RunSpec {
  ModelConfig model;
  TrainConfig train;
  DataSource data;
  PerturbSpec noise;  // kind == None for a clean run
  std::string tag;    // free-form label copied into metrics records
};

struct RunOutcome {
  TrainReport report;
  double final_test_acc = 0.0;
  Model model;
};

// Train + evaluate one configuration. Fully deterministic given
// spec.train.seed (the dataset, init and noise streams all derive from it).
// Records go to `mw` when set, or into `record_sink` (so grid drivers can run
// several experiments concurrently and still emit records in a fixed order).
RunOutcome run_experiment(const RunSpec& spec, MetricsWriter* mw,
                          std::vector<Json>* record_sink = nullptr);

// Runs every spec (OpenMP across runs, each run single-threaded inside) and
// writes collected records in spec order.
std::vector<RunOutcome> run_experiments(const std::vector<RunSpec>& specs, MetricsWriter* mw);

// ---- positional-embedding ablation: {nimba, axis-triple} x {PE on, off} ----

struct AblationCell {
  OrderingStrategy ordering;
  bool pe = false;
  std::uint64_t seed = 0;
  double acc = 0.0;
};

struct AblationResult {
  std::vector<AblationCell> cells;
  double mean_acc_nimba_pe = 0.0, mean_acc_nimba_nope = 0.0;
  double mean_acc_axis_pe = 0.0, mean_acc_axis_nope = 0.0;
  double gap_nimba = 0.0;  // mean(acc PE on) - mean(acc PE off)
  double gap_axis = 0.0;
};

AblationResult run_pe_ablation(const ModelConfig& base, const TrainConfig& train,
                               const DataSource& data, const std::vector<std::uint64_t>& seeds,
                               MetricsWriter* mw);

// ---- robustness matrix: {noise kinds} x {train, test, both} x {orderings} ----

struct RobustnessCell {
  PerturbKind kind = PerturbKind::None;
  ApplyTo apply_to = ApplyTo::Both;
  OrderingStrategy ordering;
  std::vector<double> accs;  // one per seed used for this cell
  double mean_acc = 0.0;
};

struct RobustnessResult {
  std::vector<RobustnessCell> cells;      // 5 x 3 x 2 grid
  std::vector<RobustnessCell> baselines;  // no-noise reference per ordering
  double baseline_nimba = 0.0, baseline_axis = 0.0;
  double rot_test_nimba = 0.0, rot_test_axis = 0.0;  // mean accs of the trend cells
  double drop_nimba = 0.0, drop_axis = 0.0;
};

// Each ordering runs in its own natural configuration: the proximity
// reordering without positional embeddings, axis-triple with them.
// `full_seeds` are used for the baselines and the rotation/test trend cells;
// the remaining cells use the first `cell_seeds` of them.
RobustnessResult run_robustness(const ModelConfig& base, const TrainConfig& train,
                                const DataSource& data, const std::vector<std::uint64_t>& full_seeds,
                                int cell_seeds, const PerturbSpec& magnitudes, MetricsWriter* mw);

// Paper-reported seed triple, used as the default for repeated experiments.
std::vector<std::uint64_t> default_seeds();

}  // namespace pointseq
