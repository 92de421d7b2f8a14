// Copyright 2026 The flexff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Compiled with -mavx2 -mfma. Only reached through avx2_kernels(), which
// checks the running CPU first.

#include <cmath>

#include "flexff/simd/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace flexff::simd {
namespace {

// Horizontal sum with a fixed association: (l0 + l2) + (l1 + l3).
inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Reference per-element sequence shared by every dot-like path below.
inline double dot_one(const double* a, const double* b, std::size_t k) {
  const std::size_t k4 = k & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k4; p += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + p), _mm256_loadu_pd(b + p), acc);
  double s = hsum(acc);
  for (std::size_t p = k4; p < k; ++p) s = std::fma(a[p], b[p], s);
  return s;
}

double dot_avx2(const double* a, const double* b, std::size_t n) { return dot_one(a, b, n); }

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d va = _mm256_set1_pd(alpha);
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (std::size_t i = n4; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

inline void store(double* c, double s, bool accumulate) { *c = accumulate ? *c + s : s; }

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate) {
  const std::size_t k4 = k & ~std::size_t{3};
  std::size_t i = 0;
  // 2×4 register block; each accumulator follows dot_one's sequence exactly.
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * lda;
    const double* a1 = a0 + lda;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c02 = _mm256_setzero_pd(), c03 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c12 = _mm256_setzero_pd(), c13 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k4; p += 4) {
        const __m256d x0 = _mm256_loadu_pd(a0 + p);
        const __m256d x1 = _mm256_loadu_pd(a1 + p);
        __m256d w = _mm256_loadu_pd(b0 + p);
        c00 = _mm256_fmadd_pd(x0, w, c00);
        c10 = _mm256_fmadd_pd(x1, w, c10);
        w = _mm256_loadu_pd(b1 + p);
        c01 = _mm256_fmadd_pd(x0, w, c01);
        c11 = _mm256_fmadd_pd(x1, w, c11);
        w = _mm256_loadu_pd(b2 + p);
        c02 = _mm256_fmadd_pd(x0, w, c02);
        c12 = _mm256_fmadd_pd(x1, w, c12);
        w = _mm256_loadu_pd(b3 + p);
        c03 = _mm256_fmadd_pd(x0, w, c03);
        c13 = _mm256_fmadd_pd(x1, w, c13);
      }
      double s[8] = {hsum(c00), hsum(c01), hsum(c02), hsum(c03),
                     hsum(c10), hsum(c11), hsum(c12), hsum(c13)};
      for (std::size_t p = k4; p < k; ++p) {
        s[0] = std::fma(a0[p], b0[p], s[0]);
        s[1] = std::fma(a0[p], b1[p], s[1]);
        s[2] = std::fma(a0[p], b2[p], s[2]);
        s[3] = std::fma(a0[p], b3[p], s[3]);
        s[4] = std::fma(a1[p], b0[p], s[4]);
        s[5] = std::fma(a1[p], b1[p], s[5]);
        s[6] = std::fma(a1[p], b2[p], s[6]);
        s[7] = std::fma(a1[p], b3[p], s[7]);
      }
      double* c0 = c + i * ldc + j;
      double* c1 = c0 + ldc;
      for (int q = 0; q < 4; ++q) {
        store(c0 + q, s[q], accumulate);
        store(c1 + q, s[4 + q], accumulate);
      }
    }
    for (; j < n; ++j) {
      store(c + i * ldc + j, dot_one(a0, b + j * ldb, k), accumulate);
      store(c + (i + 1) * ldc + j, dot_one(a1, b + j * ldb, k), accumulate);
    }
  }
  for (; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      store(c + i * ldc + j, dot_one(a + i * lda, b + j * ldb, k), accumulate);
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) axpy_avx2(a[i * lda + p], b + p * ldb, ci, n);
  }
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * lda;
    const double* bp = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      if (ap[i] == 0.0) continue;
      axpy_avx2(ap[i], bp, c + i * ldc, n);
    }
  }
}

void adam_update_avx2(double* params, const double* grads, double* m, double* v,
                      std::size_t n, double step, double beta1, double beta2,
                      double inv_bc2, double eps) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d b1 = _mm256_set1_pd(beta1), c1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d b2 = _mm256_set1_pd(beta2), c2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d ib = _mm256_set1_pd(inv_bc2), ve = _mm256_set1_pd(eps);
  const __m256d vs = _mm256_set1_pd(step);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d g = _mm256_loadu_pd(grads + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(c1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(c2, _mm256_mul_pd(g, g)));
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, ib)), ve);
    const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vs, mi), den);
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    _mm256_storeu_pd(params + i, _mm256_sub_pd(_mm256_loadu_pd(params + i), upd));
  }
  for (std::size_t i = n4; i < n; ++i) {
    const double g = grads[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g);
    params[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelTable table{Isa::kAvx2,   "avx2",       dot_avx2,
                                 axpy_avx2,    gemm_nt_avx2, gemm_nn_avx2,
                                 gemm_tn_avx2, adam_update_avx2};
  return supported ? &table : nullptr;
}

}  // namespace flexff::simd

#else

namespace flexff::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace flexff::simd

#endif
