#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pointseq/commands.hpp"
#include "pointseq/datagen.hpp"
#include "pointseq/io.hpp"

using namespace pointseq;
namespace fs = std::filesystem;

namespace {

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<nlohmann::json> records;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) records.push_back(nlohmann::json::parse(line));
  return records;
}

}  // namespace

TEST_CASE("cmd_reorder writes the order file and a metrics record") {
  const std::string cloud_path = "/tmp/pointseq_cmd_cloud.xyz";
  const std::string out_path = "/tmp/pointseq_cmd_order.txt";
  const std::string metrics_path = "/tmp/pointseq_cmd_metrics.jsonl";
  save_xyz(cloud_path, gen_shape(ShapeKind::Sphere, 256, 7));

  ReorderOptions opt;
  opt.input = cloud_path;
  opt.output = out_path;
  opt.metrics_out = metrics_path;
  opt.strategy = "nimba";
  opt.r = 0.8;
  opt.n_c = 32;
  CHECK(cmd_reorder(opt) == kExitOk);

  // output is a permutation of 0..n_c-1
  std::ifstream in(out_path);
  std::string line;
  std::vector<int> indices;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::size_t pos;
    int idx;
    double x, y, z, dist;
    REQUIRE((is >> pos >> idx >> x >> y >> z >> dist));
    indices.push_back(idx);
  }
  REQUIRE(indices.size() == 32);
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 32; ++i) CHECK(sorted[i] == i);

  const auto records = read_jsonl(metrics_path);
  REQUIRE(records.size() == 1);
  CHECK(records[0]["schema"] == "pointseq.metrics.v1");
  CHECK(records[0]["seq_len"] == 32);
  CHECK(records[0]["frac_adjacent_within_r"].is_number());

  std::remove(cloud_path.c_str());
  std::remove(out_path.c_str());
  std::remove(metrics_path.c_str());
}

TEST_CASE("cmd_reorder: axis-triple emits 3*n_c entries; huge r equals ysort") {
  const std::string cloud_path = "/tmp/pointseq_cmd_cloud2.xyz";
  save_xyz(cloud_path, gen_shape(ShapeKind::Torus, 200, 8));

  ReorderOptions triple;
  triple.input = cloud_path;
  triple.output = "/tmp/pointseq_cmd_triple.txt";
  triple.strategy = "axis-triple";
  triple.n_c = 16;
  CHECK(cmd_reorder(triple) == kExitOk);
  std::ifstream in(triple.output);
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 48);

  ReorderOptions big;
  big.input = cloud_path;
  big.output = "/tmp/pointseq_cmd_bigr.txt";
  big.strategy = "nimba";
  big.r = 10.0;
  big.n_c = 16;
  CHECK(cmd_reorder(big) == kExitOk);
  ReorderOptions ysort = big;
  ysort.output = "/tmp/pointseq_cmd_ysort.txt";
  ysort.strategy = "ysort";
  CHECK(cmd_reorder(ysort) == kExitOk);
  std::ifstream a(big.output), b(ysort.output);
  std::string la, lb;
  while (std::getline(a, la) && std::getline(b, lb)) {
    if (la.empty() || la[0] == '#') continue;
    // strip the strategy header difference; compare index columns only
    std::istringstream ia(la), ib(lb);
    std::size_t pa, pb;
    int idxa, idxb;
    ia >> pa >> idxa;
    ib >> pb >> idxb;
    CHECK(idxa == idxb);
  }
  std::remove(cloud_path.c_str());
  std::remove(triple.output.c_str());
  std::remove(big.output.c_str());
  std::remove(ysort.output.c_str());
}

TEST_CASE("cmd_reorder maps bad input to the data exit code") {
  ReorderOptions opt;
  opt.input = "/tmp/definitely_missing_cloud.xyz";
  CHECK(cmd_reorder(opt) == kExitData);
}

TEST_CASE("cmd_train writes epoch metrics with the resolved config, determinism holds") {
  ExperimentOptions opt;
  opt.preset = "desk";
  opt.d_e = 8;
  opt.layers = 1;
  opt.n_points = 32;
  opt.n_c = 6;
  opt.n_p = 5;
  opt.classes = 2;
  opt.per_class = 6;
  opt.epochs = 2;
  opt.batch = 4;
  opt.lr = 1e-3;
  opt.seed = 5;
  opt.threads = 1;
  opt.metrics_out = "/tmp/pointseq_cmd_train1.jsonl";
  opt.ckpt_out = "/tmp/pointseq_cmd_train1.ckpt";
  REQUIRE(cmd_train(opt) == kExitOk);

  ExperimentOptions opt2 = opt;
  opt2.metrics_out = "/tmp/pointseq_cmd_train2.jsonl";
  opt2.ckpt_out = "/tmp/pointseq_cmd_train2.ckpt";
  REQUIRE(cmd_train(opt2) == kExitOk);

  const auto r1 = read_jsonl(opt.metrics_out);
  const auto r2 = read_jsonl(opt2.metrics_out);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    nlohmann::json a = r1[i], b = r2[i];
    a.erase("wall_s");
    b.erase("wall_s");
    CHECK(a == b);  // identical modulo timestamps
  }
  // records are self-describing
  CHECK(r1[0].contains("config"));
  CHECK(r1[0]["config"]["d_e"] == 8);
  CHECK(r1[0]["config"]["seq_len"] == 6);
  CHECK(r1[0]["train_config"]["seed"] == 5);

  // eval on the saved checkpoint reproduces an accuracy in [0, 1]
  ExperimentOptions ev = opt;
  ev.ckpt_in = opt.ckpt_out;
  ev.metrics_out = "/tmp/pointseq_cmd_eval.jsonl";
  REQUIRE(cmd_eval(ev) == kExitOk);
  const auto re = read_jsonl(ev.metrics_out);
  REQUIRE(re.size() == 1);
  CHECK(re[0]["test_acc"].is_number());
  CHECK(re[0]["test_acc"].get<double>() >= 0.0);
  CHECK(re[0]["test_acc"].get<double>() <= 1.0);

  for (const auto& p : {opt.metrics_out, opt2.metrics_out, ev.metrics_out,
                        std::string(opt.ckpt_out), std::string(opt2.ckpt_out)})
    std::remove(p.c_str());
}

TEST_CASE("cmd_train with --lr 0 leaves metrics flat") {
  ExperimentOptions opt;
  opt.d_e = 8;
  opt.layers = 1;
  opt.n_points = 32;
  opt.n_c = 6;
  opt.n_p = 5;
  opt.classes = 2;
  opt.per_class = 4;
  opt.epochs = 3;
  opt.batch = 4;
  opt.lr = 0.0;
  opt.warmup = 0;
  opt.seed = 9;
  opt.metrics_out = "/tmp/pointseq_cmd_lr0.jsonl";
  REQUIRE(cmd_train(opt) == kExitOk);
  const auto recs = read_jsonl(opt.metrics_out);
  double first = -1.0;
  for (const auto& r : recs) {
    if (r["record"] != "epoch") continue;
    if (first < 0) first = r["train_loss"].get<double>();
    CHECK(r["train_loss"].get<double>() == first);
  }
  std::remove(opt.metrics_out.c_str());
}

TEST_CASE("cmd_train maps divergence to exit code 4") {
  ExperimentOptions opt;
  opt.d_e = 8;
  opt.layers = 1;
  opt.n_points = 32;
  opt.n_c = 6;
  opt.n_p = 5;
  opt.classes = 2;
  opt.per_class = 4;
  opt.epochs = 20;
  opt.batch = 4;
  opt.lr = 1e18;
  opt.warmup = 0;
  opt.seed = 6;
  opt.metrics_out = "/tmp/pointseq_cmd_diverge.jsonl";
  CHECK(cmd_train(opt) == kExitDiverged);
  // partial metrics flushed before the abort
  std::ifstream in(opt.metrics_out);
  CHECK(in.good());
  std::remove(opt.metrics_out.c_str());
}

TEST_CASE("cmd_check quick suite passes on a healthy build") {
  CheckCmdOptions opt;
  opt.quick = true;
  opt.seed = 11;
  CHECK(cmd_check(opt) == kExitOk);
  opt.seed = 12;  // seed changes witnesses, not the verdict
  CHECK(cmd_check(opt) == kExitOk);
}

TEST_CASE("cmd_check fails when the decay-rate sign is corrupted (test hook)") {
  CheckCmdOptions opt;
  opt.quick = true;
  opt.corrupt_a_log = true;
  CHECK(cmd_check(opt) == kExitCheckFailed);
}
