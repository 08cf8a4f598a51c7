#include "pointseq/metrics.hpp"

#include <stdexcept>

namespace pointseq {

Json config_to_json(const ModelConfig& c) {
  return Json{{"d_e", c.d_e},
              {"layers", c.layers},
              {"n_points", c.n_points},
              {"n_c", c.n_c},
              {"n_p", c.n_p},
              {"use_positional_embedding", c.use_positional_embedding},
              {"ordering", to_string(c.ordering)},
              {"r", c.r},
              {"nimba_candidate", c.nimba_candidate == NimbaCandidate::First ? "first" : "nearest"},
              {"expand", c.expand},
              {"conv_kernel", c.conv_kernel},
              {"state_size", c.state_size},
              {"classes", c.classes},
              {"patch_hidden", c.patch_hidden},
              {"center_hidden", c.center_hidden},
              {"head_hidden", c.head_hidden},
              {"quadratic_skip", c.quadratic_skip},
              {"seq_len", c.seq_len()}};
}

Json train_config_to_json(const TrainConfig& c) {
  return Json{{"epochs", c.epochs},       {"batch_size", c.batch_size},
              {"warmup_epochs", c.warmup_epochs}, {"lr", c.lr},
              {"lr_min", c.lr_min},       {"weight_decay", c.weight_decay},
              {"beta1", c.beta1},         {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},   {"seed", c.seed}};
}

MetricsWriter::MetricsWriter(const std::string& path) {
  if (path.empty()) return;
  out_.open(path);
  if (!out_) throw std::runtime_error("cannot open metrics file " + path);
}

void MetricsWriter::write(Json record) {
  if (!out_.is_open()) return;
  record["schema"] = kSchema;
  for (auto& [k, v] : common_.items())
    if (!record.contains(k)) record[k] = v;
  out_ << record.dump() << "\n";
  out_.flush();
}

}  // namespace pointseq
