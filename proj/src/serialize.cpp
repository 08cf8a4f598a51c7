#include "pointseq/serialize.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pointseq {

std::string to_string(OrderingStrategy s) {
  switch (s) {
    case OrderingStrategy::YSort: return "ysort";
    case OrderingStrategy::AxisTriple: return "axis-triple";
    case OrderingStrategy::NimbaProximity: return "nimba";
    case OrderingStrategy::Identity: return "identity";
  }
  return "?";
}

OrderingStrategy ordering_from_string(const std::string& s) {
  if (s == "ysort") return OrderingStrategy::YSort;
  if (s == "axis-triple") return OrderingStrategy::AxisTriple;
  if (s == "nimba") return OrderingStrategy::NimbaProximity;
  if (s == "identity") return OrderingStrategy::Identity;
  throw std::invalid_argument("unknown ordering strategy: " + s);
}

namespace {

std::vector<int> stable_axis_order(const std::vector<Point3>& centers, Axis axis) {
  std::vector<int> order(centers.size());
  std::iota(order.begin(), order.end(), 0);
  const int a = static_cast<int>(axis);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return centers[i][a] < centers[j][a]; });
  return order;
}

}  // namespace

Serialization sort_axis(const std::vector<Point3>& centers, Axis axis) {
  if (centers.empty()) throw std::invalid_argument("empty input");
  Serialization s;
  s.order = stable_axis_order(centers, axis);
  s.strategy = OrderingStrategy::YSort;  // nearest label; callers may override
  s.replication = 1;
  return s;
}

Serialization axis_triple(const std::vector<Point3>& centers) {
  if (centers.empty()) throw std::invalid_argument("empty input");
  Serialization s;
  s.strategy = OrderingStrategy::AxisTriple;
  s.replication = 3;
  s.order.reserve(centers.size() * 3);
  for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
    const auto part = stable_axis_order(centers, a);
    s.order.insert(s.order.end(), part.begin(), part.end());
  }
  return s;
}

Serialization nimba_reorder(const std::vector<Point3>& centers, double r, NimbaCandidate candidate) {
  if (centers.empty()) throw std::invalid_argument("empty input");
  if (!(r >= 0.0)) throw std::invalid_argument("threshold r must be nonnegative");

  Serialization s;
  s.strategy = OrderingStrategy::NimbaProximity;
  s.replication = 1;
  s.r = r;
  s.order = stable_axis_order(centers, Axis::Y);

  const double r2 = r * r;
  const int n = static_cast<int>(s.order.size());
  auto& ord = s.order;
  for (int i = 0; i + 1 < n; ++i) {
    const Point3& cur = centers[ord[i]];
    if (sq_dist(cur, centers[ord[i + 1]]) < r2) continue;

    int pick = -1;
    if (candidate == NimbaCandidate::First) {
      for (int j = i + 2; j < n; ++j) {
        if (sq_dist(cur, centers[ord[j]]) < r2) {
          pick = j;
          break;
        }
      }
    } else {
      double best = r2;
      for (int j = i + 2; j < n; ++j) {
        const double d2 = sq_dist(cur, centers[ord[j]]);
        if (d2 < best) {
          best = d2;
          pick = j;
        }
      }
    }
    if (pick >= 0) {
      // pull ord[pick] forward to position i+1, shifting the span right
      const int moved = ord[pick];
      for (int j = pick; j > i + 1; --j) ord[j] = ord[j - 1];
      ord[i + 1] = moved;
    }
  }
  return s;
}

Serialization identity_order(int n_c) {
  if (n_c < 1) throw std::invalid_argument("empty input");
  Serialization s;
  s.strategy = OrderingStrategy::Identity;
  s.replication = 1;
  s.order.resize(n_c);
  std::iota(s.order.begin(), s.order.end(), 0);
  return s;
}

Serialization make_order(const std::vector<Point3>& centers, OrderingStrategy strategy, double r,
                         NimbaCandidate candidate) {
  switch (strategy) {
    case OrderingStrategy::YSort: return sort_axis(centers, Axis::Y);
    case OrderingStrategy::AxisTriple: return axis_triple(centers);
    case OrderingStrategy::NimbaProximity: return nimba_reorder(centers, r, candidate);
    case OrderingStrategy::Identity: return identity_order(static_cast<int>(centers.size()));
  }
  throw std::invalid_argument("unknown ordering strategy");
}

SequenceBatch apply_order(const SequenceBatch& tokens, const Serialization& s) {
  SequenceBatch out(tokens.batch, static_cast<int>(s.order.size()), tokens.width);
  for (int b = 0; b < tokens.batch; ++b) {
    for (std::size_t i = 0; i < s.order.size(); ++i) {
      const int src = s.order[i];
      if (src < 0 || src >= tokens.len) throw std::out_of_range("order index out of range");
      const double* in = tokens.row(b, src);
      double* dst = out.row(b, static_cast<int>(i));
      std::copy(in, in + tokens.width, dst);
    }
  }
  return out;
}

}  // namespace pointseq
