#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pointseq {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // measurement or witness description
};

struct CheckOptions {
  std::uint64_t seed = 0;
  bool quick = false;          // reduced trial counts
  bool corrupt_a_log = false;  // test hook: flip one decay-rate sign
};

// Machine-checkable invariants from every module. Each entry reports a
// measured quantity (max error, witness) next to its threshold.
std::vector<CheckResult> run_invariant_suite(const CheckOptions& opt);

}  // namespace pointseq
