#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

// Dense kernels. Every output row depends only on the matching input row and
// is accumulated in a fixed order, so results do not depend on batch size or
// on which other rows share the call.
namespace xlft::kernels {

// c[m,n] += a[m,k] * b[k,n]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,k] += a[m,n] * b[k,n]^T. Each dot product is summed from 0 over n in
// order, then added to c; b is transposed once so the inner loop vectorises.
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                    std::size_t k) {
  std::vector<double> bt(n * k), acc(k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    double* __restrict s = acc.data();
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double av = arow[j];
      const double* __restrict brow = bt.data() + j * k;
      for (std::size_t p = 0; p < k; ++p) s[p] += av * brow[p];
    }
    double* __restrict crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) crow[p] += s[p];
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* __restrict brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* __restrict crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace xlft::kernels
