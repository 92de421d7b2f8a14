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

#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision kernels used by the recurrent network stack and the
// optimizer. Every kernel has a portable scalar reference implementation and,
// on x86-64, an AVX2+FMA variant selected once at startup.
//
// Within one variant, each output element is produced by a fixed operation
// sequence that does not depend on the matrix blocking or on the number of
// rows in the batch. Running one window alone or inside a batch therefore
// gives bit-identical results. Across variants results agree only to rounding.

namespace flexff::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  // Σ a[i] b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // C[i,j] (+)= Σ_p A[i,p] B[j,p]; A is m×k (lda), B is n×k (ldb), C is m×n (ldc).
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate);

  // C[i,j] += Σ_p A[i,p] B[p,j]; A is m×k, B is k×n, C is m×n.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);

  // C[i,j] += Σ_p A[p,i] B[p,j]; A is k×m, B is k×n, C is m×n.
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);

  // Bias-corrected Adam update over a flat parameter vector.
  //   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g²
  //   p -= step * m / (sqrt(v / bc2) + eps),  step = lr / bc1
  void (*adam_update)(double* params, const double* grads, double* m, double* v,
                      std::size_t n, double step, double beta1, double beta2,
                      double inv_bc2, double eps);
};

const KernelTable& scalar_kernels();

// Null when the build target has no AVX2 variant or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Active table. First use picks AVX2 when available unless the environment
// variable FLEXFF_SIMD=scalar is set.
const KernelTable& kernels();

// Switch the active table (tests and benchmarks). Returns false when the
// requested variant is unavailable on this machine.
bool set_active_isa(Isa isa);

Isa active_isa();
std::string_view isa_name(Isa isa);

}  // namespace flexff::simd
