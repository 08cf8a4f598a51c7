#pragma once

#include <string>
#include <vector>

#include "pointseq/types.hpp"

namespace pointseq {

enum class OrderingStrategy { YSort, AxisTriple, NimbaProximity, Identity };

std::string to_string(OrderingStrategy s);
OrderingStrategy ordering_from_string(const std::string& s);

enum class Axis { X = 0, Y = 1, Z = 2 };

// Which candidate a proximity scan picks when an adjacent gap exceeds r:
// the first one within r along the sequence, or the nearest one within r.
enum class NimbaCandidate { First, Nearest };

// A processing order over n_c centers. replication == 1 means `order` is a
// permutation of 0..n_c-1; the axis-triple strategy replicates the centers
// three times (replication == 3, length 3*n_c).
struct Serialization {
  std::vector<int> order;
  OrderingStrategy strategy = OrderingStrategy::Identity;
  int replication = 1;
  double r = 0.0;  // proximity threshold, meaningful for NimbaProximity only
};

// Stable ascending sort of the centers along one coordinate.
Serialization sort_axis(const std::vector<Point3>& centers, Axis axis);

// x-, y-, z-sorted orders concatenated; length 3*n_c.
Serialization axis_triple(const std::vector<Point3>& centers);

// Greedy proximity reordering of the y-sorted sequence: whenever the gap to
// the next element is >= r, scan the remainder for the first (or nearest)
// element within r and pull it forward. Single pass, no restarts.
Serialization nimba_reorder(const std::vector<Point3>& centers, double r,
                            NimbaCandidate candidate = NimbaCandidate::First);

Serialization identity_order(int n_c);

// Dispatch on strategy; r is used by NimbaProximity only.
Serialization make_order(const std::vector<Point3>& centers, OrderingStrategy strategy, double r,
                         NimbaCandidate candidate = NimbaCandidate::First);

// output[i] = input[s.order[i]]; length replication * n_c.
SequenceBatch apply_order(const SequenceBatch& tokens, const Serialization& s);

template <typename T>
std::vector<T> apply_order(const std::vector<T>& items, const Serialization& s) {
  std::vector<T> out;
  out.reserve(s.order.size());
  for (int idx : s.order) {
    if (idx < 0 || idx >= static_cast<int>(items.size())) throw std::out_of_range("order index out of range");
    out.push_back(items[idx]);
  }
  return out;
}

}  // namespace pointseq
