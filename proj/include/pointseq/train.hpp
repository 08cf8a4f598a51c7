#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pointseq/datagen.hpp"
#include "pointseq/nn.hpp"
#include "pointseq/perturb.hpp"

namespace pointseq {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  int warmup_epochs = 5;
  double lr = 1e-3;
  double lr_min = 1e-6;
  double weight_decay = 5e-2;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool eval_every_epoch = true;

  // desk: the defaults above; points1024/points2048: AdamW at 1e-4 / 5e-4,
  // weight decay 5e-2, cosine schedule, 10 warmup epochs, batch 32, 300 epochs
  static TrainConfig preset(const std::string& name);
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double seconds = 0.0;  // wall time, excluded from determinism comparisons
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  bool diverged = false;
  int diverged_epoch = -1;
  double final_test_acc = 0.0;
};

// AdamW with decoupled weight decay (2-D tensors except the state-decay
// matrix) and a cosine schedule with linear warmup.
class AdamW {
 public:
  AdamW(const ParamSet& params, const TrainConfig& cfg);
  void step(ParamSet& params, const GradSet& grads, double lr);

 private:
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Per-epoch training noise is fresh per (epoch, item); test noise is fixed
// per item. Both are derived from the run seed, so a run is reproducible
// bit-for-bit regardless of thread count.
struct NoiseHooks {
  const PerturbSpec* train_noise = nullptr;  // applied when apply_to is train/both
  const PerturbSpec* test_noise = nullptr;   // applied when apply_to is test/both
};

TrainReport train_model(Model& model, const LabeledDataset& train, const LabeledDataset& test,
                        const TrainConfig& cfg, const NoiseHooks& noise = {},
                        const std::function<void(const EpochMetrics&)>& on_epoch = nullptr);

// Accuracy of the model on a dataset (optionally perturbed per item).
double evaluate(const Model& model, const LabeledDataset& data, const PerturbSpec* noise,
                std::uint64_t noise_seed);

}  // namespace pointseq
