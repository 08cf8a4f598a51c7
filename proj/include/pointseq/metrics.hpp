#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "pointseq/nn.hpp"
#include "pointseq/train.hpp"

namespace pointseq {

using Json = nlohmann::json;

Json config_to_json(const ModelConfig& cfg);
Json train_config_to_json(const TrainConfig& cfg);

// Line-delimited JSON records. Every record carries the schema tag, the
// command that produced it and the fully resolved configuration.
class MetricsWriter {
 public:
  MetricsWriter() = default;  // discarding writer
  explicit MetricsWriter(const std::string& path);

  void write(Json record);
  bool enabled() const { return out_.is_open(); }
  void set_common(Json common) { common_ = std::move(common); }

  static constexpr const char* kSchema = "pointseq.metrics.v1";

 private:
  std::ofstream out_;
  Json common_;
};

}  // namespace pointseq
