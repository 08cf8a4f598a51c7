#pragma once

#include <cmath>

namespace pointseq {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// d/dx softplus = sigmoid
inline double silu(double x) { return x * sigmoid(x); }

inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// inverse of softplus: x such that softplus(x) = y, y > 0
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace pointseq
