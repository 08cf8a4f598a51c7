#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointseq/metrics.hpp"

namespace pointseq {

struct BenchConfig {
  std::vector<int> widths = {16, 64};
  std::vector<int> lengths = {64, 128, 256, 512, 1024};
  int repeats = 7;
  int inner = 3;       // iterations averaged inside one repeat
  int n_c = 256;       // base length for the N vs 3N comparison
  int state_size = 16;
  std::uint64_t seed = 0;
  bool kernels = true;  // include the serial-vs-OpenMP kernel section
};

struct MixerPoint {
  int width = 0, len = 0;
  double s6_ms = 0.0, s6_iqr = 0.0;
  double attn_ms = 0.0, attn_iqr = 0.0;
};

struct TripleCmp {
  int width = 0, n_c = 0;
  double t_n_ms = 0.0, t_3n_ms = 0.0;
};

struct KernelCmp {
  std::string kernel;
  int n = 0;
  int threads = 0;
  double serial_ms = 0.0, parallel_ms = 0.0;
};

struct BenchResult {
  std::vector<MixerPoint> mixer;   // single-thread S6 vs attention scaling
  std::vector<TripleCmp> triple;   // S6 forward at n_c vs 3*n_c
  std::vector<KernelCmp> kernels;  // serial reference vs OpenMP kernels
};

// Median-of-repeats wall times with warmup; mixer timings pin one thread.
BenchResult run_bench(const BenchConfig& cfg, MetricsWriter* mw);

}  // namespace pointseq
