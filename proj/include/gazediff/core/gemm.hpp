#pragma once

// Row-major accumulate-GEMM kernels. The innermost loop always runs over a
// contiguous output row so the compiler can vectorize it.

#include <cstddef>
#include <vector>

namespace gazediff::kernels {

/// C[M,N] += A[M,K] * B[K,N]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a, const T* __restrict b, T* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict crow = c + i * n;
    const T* __restrict arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = arow[p];
      const T* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

/// C[M,N] += A[K,M]^T * B[K,N]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a, const T* __restrict b, T* __restrict c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* __restrict arow = a + p * m;
    const T* __restrict brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T s = arow[i];
      T* __restrict crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

/// C[M,N] += A[M,K] * B[N,K]^T, via a transposed copy of B.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(m, n, k, a, bt.data(), c);
}

}  // namespace gazediff::kernels
