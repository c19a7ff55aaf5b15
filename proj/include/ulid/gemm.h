// include/ulid/gemm.h

// Copyright 2026  The ulid Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ULID_GEMM_H_
#define ULID_GEMM_H_

#include <cstdint>

namespace ulid {

// C[M x N] (row-major) = A[M x K] * B[K x N], or += when accumulate is set.
//
// Contract: every output element is one fused-multiply-add chain over k in
// ascending order. The SIMD paths keep that per-element order (lanes hold
// independent elements), so the result is bit-identical to the scalar
// std::fma loop on every build. conv2d relies on this to match its
// direct-loop reference exactly.
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
             const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate);

// C[M x J] (+)= A[M x N] * B[J x N]^T, i.e. c[i][j] accumulates the dot
// product of row i of A with row j of B. Summation order is unspecified but
// fixed for a given build (used only on gradient paths).
template <typename T>
void gemm_abt(int64_t m, int64_t j, int64_t n, const T* a, int64_t lda,
              const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate);

// dst[N x M] = src[M x N]^T (row-major both sides).
template <typename T>
void transpose(int64_t m, int64_t n, const T* src, int64_t lds, T* dst,
               int64_t ldd);

}  // namespace ulid

#endif  // ULID_GEMM_H_
