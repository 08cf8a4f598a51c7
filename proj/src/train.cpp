#include "pointseq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "pointseq/rng.hpp"

namespace pointseq {

namespace {

bool decays(const ParamTensor& t) {
  // a_ln parametrizes the state decay; pulling it toward 0 has no
  // regularizing meaning, so it is excluded like biases and norms.
  return t.decay && t.name.find("a_ln") == std::string::npos;
}

bool should_perturb_train(const PerturbSpec* s) {
  return s && s->kind != PerturbKind::None &&
         (s->apply_to == ApplyTo::Train || s->apply_to == ApplyTo::Both);
}

bool should_perturb_test(const PerturbSpec* s) {
  return s && s->kind != PerturbKind::None &&
         (s->apply_to == ApplyTo::Test || s->apply_to == ApplyTo::Both);
}

}  // namespace

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig t;
  if (name == "desk") return t;
  if (name == "points1024" || name == "points2048") {
    t.epochs = 300;
    t.batch_size = 32;
    t.warmup_epochs = 10;
    t.lr = name == "points1024" ? 1e-4 : 5e-4;
    return t;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

AdamW::AdamW(const ParamSet& params, const TrainConfig& cfg) : cfg_(cfg) {
  m_.resize(params.tensors().size());
  v_.resize(params.tensors().size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i].assign(params.tensors()[i].size(), 0.0);
    v_[i].assign(params.tensors()[i].size(), 0.0);
  }
}

void AdamW::step(ParamSet& params, const GradSet& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    ParamTensor& t = params.tensors()[i];
    const auto& g = grads.g[i];
    auto& m = m_[i];
    auto& v = v_[i];
    const double wd = decays(t) ? cfg_.weight_decay : 0.0;
    for (std::size_t j = 0; j < t.v.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      t.v[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.adam_eps) + wd * t.v[j]);
    }
  }
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (cfg.warmup_epochs > 0 && epoch < cfg.warmup_epochs)
    return cfg.lr * static_cast<double>(epoch + 1) / static_cast<double>(cfg.warmup_epochs);
  const int total = std::max(1, cfg.epochs - cfg.warmup_epochs);
  const double prog = static_cast<double>(epoch - cfg.warmup_epochs) / static_cast<double>(total);
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(M_PI * std::min(1.0, prog)));
}

double evaluate(const Model& model, const LabeledDataset& data, const PerturbSpec* noise,
                std::uint64_t noise_seed) {
  const int n = static_cast<int>(data.items.size());
  if (n == 0) return 0.0;
  std::vector<char> correct(n, 0);
  std::string error;
  bool failed = false;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const LabeledItem& item = data.items[i];
      PointCloud cloud = item.cloud;
      if (should_perturb_test(noise))
        cloud = apply_perturb(cloud, *noise, mix_seed(noise_seed, 0x7E57, item.item_id));
      const auto logits = model_logits(model, cloud);
      const int pred =
          static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      correct[i] = pred == item.label ? 1 : 0;
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        error = e.what();
      }
    }
  }
  if (failed) throw std::runtime_error(error);
  int hits = 0;
  for (char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(n);
}

TrainReport train_model(Model& model, const LabeledDataset& train, const LabeledDataset& test,
                        const TrainConfig& cfg, const NoiseHooks& noise,
                        const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (train.items.empty()) throw std::invalid_argument("empty training set");
  TrainReport report;
  AdamW opt(model.params, cfg);
  GradSet grads;
  grads.init_like(model.params);

  const int n_train = static_cast<int>(train.items.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x5F011));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(cfg, epoch);

    for (int i = n_train; i > 1; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(0, i - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    int step_count = 0, hit = 0, seen = 0;
    bool diverged = false;
    for (int begin = 0; begin < n_train; begin += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n_train - begin);
      std::vector<PreppedSample> batch(bs);
      std::string error;
      bool failed = false;
#pragma omp parallel for schedule(dynamic)
      for (int s = 0; s < bs; ++s) {
        try {
          const LabeledItem& item = train.items[order[begin + s]];
          PointCloud cloud = item.cloud;
          if (should_perturb_train(noise.train_noise))
            cloud = apply_perturb(cloud, *noise.train_noise,
                                  mix_seed(cfg.seed, 0x7121 + epoch, item.item_id));
          batch[s] = prep_sample(cloud, item.label, model.cfg);
        } catch (const std::exception& e) {
#pragma omp critical
          {
            failed = true;
            error = e.what();
          }
        }
      }
      if (failed) throw std::runtime_error(error);

      grads.zero();
      std::vector<int> preds;
      const double loss = loss_and_grad(model, batch, grads, &preds);
      if (!std::isfinite(loss)) {
        diverged = true;
        break;
      }
      opt.step(model.params, grads, lr);
      loss_sum += loss;
      ++step_count;
      for (int s = 0; s < bs; ++s) hit += preds[s] == batch[s].label ? 1 : 0;
      seen += bs;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    em.train_loss = step_count > 0 ? loss_sum / step_count : std::nan("");
    em.train_acc = seen > 0 ? static_cast<double>(hit) / seen : 0.0;
    if (diverged) {
      em.test_acc = std::nan("");
      report.diverged = true;
      report.diverged_epoch = epoch;
      report.epochs.push_back(em);
      if (on_epoch) on_epoch(em);
      break;
    }
    if (cfg.eval_every_epoch || epoch == cfg.epochs - 1)
      em.test_acc = evaluate(model, test, noise.test_noise, cfg.seed);
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(em);
    if (on_epoch) on_epoch(em);
  }
  if (!report.epochs.empty() && !report.diverged) report.final_test_acc = report.epochs.back().test_acc;
  return report;
}

}  // namespace pointseq
