#include <CLI11.hpp>

#include "pointseq/commands.hpp"

using namespace pointseq;

namespace {

void add_experiment_flags(CLI::App* cmd, ExperimentOptions& opt, bool training) {
  cmd->add_option("--preset", opt.preset, "model preset: desk, points1024, points2048");
  cmd->add_option("--ordering", opt.ordering, "nimba | axis-triple | ysort | identity");
  cmd->add_flag("--pe,!--no-pe", opt.pe, "use positional (center) embeddings");
  cmd->add_option("--r", opt.r, "proximity threshold for the nimba ordering");
  cmd->add_option("--nimba-candidate", opt.candidate, "first | nearest");
  cmd->add_option("--d-e", opt.d_e, "token width (0 = preset)");
  cmd->add_option("--layers", opt.layers, "encoder depth (-1 = preset)");
  cmd->add_option("--n-c", opt.n_c, "number of centers (0 = preset)");
  cmd->add_option("--n-p", opt.n_p, "points per patch (0 = preset)");
  cmd->add_option("--n-points", opt.n_points, "points per cloud (0 = preset)");
  cmd->add_option("--classes", opt.classes, "class count (0 = preset)");
  cmd->add_option("--data", opt.data_dir, "dataset directory (default: synthetic shapes)");
  cmd->add_option("--per-class", opt.per_class, "synthetic items per class");
  cmd->add_flag("--random-pose", opt.random_pose, "random rotation per synthetic item");
  if (training) {
    cmd->add_option("--epochs", opt.epochs);
    cmd->add_option("--batch", opt.batch);
    cmd->add_option("--warmup", opt.warmup);
    cmd->add_option("--lr", opt.lr);
    cmd->add_option("--weight-decay", opt.weight_decay);
  }
  cmd->add_option("--perturb", opt.perturb, "none | rotation | rhf | jitter | rid | all");
  cmd->add_option("--apply-to", opt.apply_to, "train | test | both");
  cmd->add_option("--sigma", opt.sigma, "jitter std");
  cmd->add_option("--clip", opt.clip, "jitter clamp");
  cmd->add_option("--p", opt.p, "dropout probability");
  cmd->add_option("--seed", opt.seed);
  cmd->add_option("--metrics-out", opt.metrics_out, "JSONL metrics path");
  cmd->add_option("--threads", opt.threads, "OpenMP thread count (0 = default)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point-cloud serialization + state-space sequence mixer toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "text config file (ini format)");

  ReorderOptions reorder;
  auto* creorder = app.add_subcommand("reorder", "serialize a cloud's centers and dump the order");
  creorder->add_option("--input", reorder.input, "input cloud (.xyz or .off)")->required();
  creorder->add_option("--output", reorder.output, "output path (default stdout)");
  creorder->add_option("--strategy", reorder.strategy, "nimba | axis-triple | ysort | identity");
  creorder->add_option("--r", reorder.r);
  creorder->add_option("--nimba-candidate", reorder.candidate, "first | nearest");
  creorder->add_option("--n-c", reorder.n_c);
  creorder->add_option("--n-points", reorder.n_points, "sampling density for OFF meshes");
  creorder->add_option("--seed", reorder.seed);
  creorder->add_option("--metrics-out", reorder.metrics_out);

  ExperimentOptions train;
  auto* ctrain = app.add_subcommand("train", "train a classifier");
  add_experiment_flags(ctrain, train, true);
  ctrain->add_option("--ckpt-out", train.ckpt_out, "checkpoint output path");

  ExperimentOptions eval;
  auto* ceval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_experiment_flags(ceval, eval, false);
  ceval->add_option("--ckpt", eval.ckpt_in, "checkpoint path")->required();

  ExperimentOptions ablate;
  auto* cablate = app.add_subcommand("ablate-pe", "2x2 ordering x positional-embedding grid");
  add_experiment_flags(cablate, ablate, true);
  cablate->add_option("--seeds", ablate.seeds, "seed list (default 0,123,777)")->delimiter(',');

  ExperimentOptions robust;
  auto* crobust = app.add_subcommand("robustness", "noise x apply-to x ordering accuracy matrix");
  add_experiment_flags(crobust, robust, true);
  crobust->add_option("--seeds", robust.seeds, "seed list (default 0,123,777)")->delimiter(',');
  crobust->add_option("--cell-seeds", robust.cell_seeds,
                      "seeds per non-trend cell (baselines and rotation/test always use all)");

  BenchOptions bench;
  auto* cbench = app.add_subcommand("bench", "mixer scaling and kernel timings");
  cbench->add_option("--widths", bench.widths)->delimiter(',');
  cbench->add_option("--lengths", bench.lengths)->delimiter(',');
  cbench->add_option("--repeats", bench.repeats);
  cbench->add_option("--inner", bench.inner, "iterations per timing sample");
  cbench->add_option("--n-c", bench.n_c, "base length for the N vs 3N comparison");
  cbench->add_flag("--no-kernels", bench.no_kernels, "skip the serial-vs-OpenMP kernel section");
  cbench->add_option("--seed", bench.seed);
  cbench->add_option("--metrics-out", bench.metrics_out);

  CheckCmdOptions check;
  auto* ccheck = app.add_subcommand("check", "run the invariant suite");
  ccheck->add_option("--seed", check.seed);
  ccheck->add_flag("--quick", check.quick, "reduced trial counts");
  ccheck->add_flag("--corrupt-a-log", check.corrupt_a_log)->group("");  // test hook, hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  if (creorder->parsed()) return cmd_reorder(reorder);
  if (ctrain->parsed()) return cmd_train(train);
  if (ceval->parsed()) return cmd_eval(eval);
  if (cablate->parsed()) return cmd_ablate_pe(ablate);
  if (crobust->parsed()) return cmd_robustness(robust);
  if (cbench->parsed()) return cmd_bench(bench);
  if (ccheck->parsed()) return cmd_check(check);
  return kExitUsage;
}
