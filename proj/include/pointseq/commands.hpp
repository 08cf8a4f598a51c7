#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointseq/bench.hpp"
#include "pointseq/checks.hpp"
#include "pointseq/experiments.hpp"

namespace pointseq {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitCheckFailed = 3,
  kExitDiverged = 4,
};

struct ReorderOptions {
  std::string input;
  std::string output;  // "-" or empty = stdout
  std::string strategy = "nimba";
  std::string candidate = "first";
  double r = 0.8;
  int n_c = 32;
  int n_points = 1024;  // sampling density for OFF input
  std::uint64_t seed = 0;
  std::string metrics_out;
};
int cmd_reorder(const ReorderOptions& opt);

struct ExperimentOptions {
  // model
  std::string preset = "desk";
  std::string ordering = "nimba";
  bool pe = false;
  double r = 0.8;
  std::string candidate = "first";
  int d_e = 0, layers = -1, n_c = 0, n_p = 0, n_points = 0, classes = 0;  // 0/-1 = preset value
  // data
  std::string data_dir;  // empty = synthetic shapes
  int per_class = 50;
  bool random_pose = false;
  // training (negative sentinels resolve to the preset's values; an explicit
  // --lr 0 is honored as a zero learning rate)
  int epochs = -1, batch = 0, warmup = -1;
  double lr = -1.0, weight_decay = -1.0;
  // noise
  std::string perturb = "none";
  std::string apply_to = "both";
  double sigma = 0.01, clip = 0.05, p = 0.3;
  // run control
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // multi-seed commands; empty = {0,123,777}
  int cell_seeds = 1;
  std::string metrics_out;
  std::string ckpt_out;
  std::string ckpt_in;  // eval
  int threads = 0;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  DataSource data_source() const;
  PerturbSpec perturb_spec() const;
};

int cmd_train(const ExperimentOptions& opt);
int cmd_eval(const ExperimentOptions& opt);
int cmd_ablate_pe(const ExperimentOptions& opt);
int cmd_robustness(const ExperimentOptions& opt);

struct BenchOptions {
  std::vector<int> widths = {16, 64};
  std::vector<int> lengths = {64, 128, 256, 512, 1024};
  int repeats = 7;
  int inner = 3;
  int n_c = 256;
  bool no_kernels = false;
  std::uint64_t seed = 0;
  std::string metrics_out;
};
int cmd_bench(const BenchOptions& opt);

struct CheckCmdOptions {
  std::uint64_t seed = 0;
  bool quick = false;
  bool corrupt_a_log = false;
};
int cmd_check(const CheckCmdOptions& opt);

}  // namespace pointseq
