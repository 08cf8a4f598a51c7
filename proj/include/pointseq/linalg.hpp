#pragma once

#include <cstddef>

namespace pointseq {

// Small dense kernels, row-major. Matrices here are a few hundred wide at
// most; 4-row blocking keeps the streamed operand out of the inner loop's
// bandwidth budget and gives the compiler independent FMA chains.

// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn(const double* A, const double* B, double* C, int m, int k, int n) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = A + static_cast<std::size_t>(i) * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* c0 = C + static_cast<std::size_t>(i) * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (int p = 0; p < k; ++p) {
      const double* b = B + static_cast<std::size_t>(p) * n;
      const double av0 = a0[p], av1 = a1[p], av2 = a2[p], av3 = a3[p];
      for (int j = 0; j < n; ++j) {
        const double bv = b[j];
        c0[j] += av0 * bv;
        c1[j] += av1 * bv;
        c2[j] += av2 * bv;
        c3[j] += av3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * k;
    double* c = C + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m x n] += A[m x k] * B^T, B stored [n x k]
inline void gemm_nt(const double* A, const double* B, double* C, int m, int k, int n) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = A + static_cast<std::size_t>(i) * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* c0 = C + static_cast<std::size_t>(i) * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (int j = 0; j < n; ++j) {
      const double* b = B + static_cast<std::size_t>(j) * k;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
      for (int p = 0; p < k; ++p) {
        const double bv = b[p];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c0[j] += s0;
      c1[j] += s1;
      c2[j] += s2;
      c3[j] += s3;
    }
  }
  for (; i < m; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * k;
    double* c = C + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* b = B + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int p = 0; p < k; ++p) acc += a[p] * b[p];
      c[j] += acc;
    }
  }
}

// C[k x n] += A^T * B, A stored [m x k], B stored [m x n]
inline void gemm_tn(const double* A, const double* B, double* C, int m, int k, int n) {
  int s = 0;
  for (; s + 4 <= m; s += 4) {
    const double* a0 = A + static_cast<std::size_t>(s) * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    const double* b0 = B + static_cast<std::size_t>(s) * n;
    const double* b1 = b0 + n;
    const double* b2 = b1 + n;
    const double* b3 = b2 + n;
    for (int i = 0; i < k; ++i) {
      double* c = C + static_cast<std::size_t>(i) * n;
      const double av0 = a0[i], av1 = a1[i], av2 = a2[i], av3 = a3[i];
      for (int j = 0; j < n; ++j)
        c[j] += av0 * b0[j] + av1 * b1[j] + av2 * b2[j] + av3 * b3[j];
    }
  }
  for (; s < m; ++s) {
    const double* a = A + static_cast<std::size_t>(s) * k;
    const double* b = B + static_cast<std::size_t>(s) * n;
    for (int i = 0; i < k; ++i) {
      const double av = a[i];
      double* c = C + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// y[m] += A[m x k] * x[k]
inline void matvec(const double* A, const double* x, double* y, int m, int k) {
  for (int i = 0; i < m; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * k;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (int p = 0; p < k; ++p) acc += a[p] * x[p];
    y[i] += acc;
  }
}

inline double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace pointseq
