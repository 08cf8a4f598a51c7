#pragma once

#include "pointseq/geometry.hpp"
#include "pointseq/serialize.hpp"
#include "pointseq/ssm.hpp"
#include "pointseq/types.hpp"

namespace pointseq::reference {

// Serial counterparts of the OpenMP kernels. The sampling/grouping variants
// recompute everything from scratch each step, so they double as independent
// oracles for the incremental implementations; outputs must match exactly.

// FPS that rebuilds min-distances over the whole selected set every step.
FpsResult fps_bruteforce(const PointCloud& cloud, int n_c, FpsStart start = FpsStart::fixed(0));

// kNN by fully sorting all N distances per center.
PatchSet knn_fullsort(const PointCloud& cloud, const std::vector<Point3>& centers,
                      const std::vector<std::int64_t>& center_indices, int n_p);

// Plain-loop scan, single thread.
SequenceBatch s6_scan_serial(const S6Params& p, const SequenceBatch& X);

// Single-thread attention.
SequenceBatch sdpa_serial(const AttnParams& p, const SequenceBatch& X, bool causal);

// Literal transcription of the greedy proximity-reordering rule, used to
// replay and verify nimba_reorder outputs step by step.
Serialization nimba_replay(const std::vector<Point3>& centers, double r,
                           NimbaCandidate candidate = NimbaCandidate::First);

}  // namespace pointseq::reference
