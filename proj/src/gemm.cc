// src/gemm.cc

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

#include "ulid/gemm.h"

#include <algorithm>
#include <cmath>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

namespace ulid {

namespace {

// Reference path: one fma chain per element, k ascending. Also serves as the
// tail handler for the SIMD paths below, which keep the identical order.
template <typename T>
inline void gemm_nn_scalar(int64_t m, int64_t n, int64_t k, const T* a,
                           int64_t lda, const T* b, int64_t ldb, T* c,
                           int64_t ldc, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * ldc + j] : T(0);
      for (int64_t p = 0; p < k; ++p) {
        acc = std::fma(a[i * lda + p], b[p * ldb + j], acc);
      }
      c[i * ldc + j] = acc;
    }
  }
}

#if defined(__AVX512F__)

template <int MR>
inline void kernel_f32_512(int64_t n0, __mmask16 m0, __mmask16 m1, int64_t k,
                           const float* a, int64_t lda, const float* b,
                           int64_t ldb, float* c, int64_t ldc,
                           bool accumulate) {
  __m512 acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) {
    if (accumulate) {
      acc0[r] = _mm512_maskz_loadu_ps(m0, c + r * ldc + n0);
      acc1[r] = _mm512_maskz_loadu_ps(m1, c + r * ldc + n0 + 16);
    } else {
      acc0[r] = _mm512_setzero_ps();
      acc1[r] = _mm512_setzero_ps();
    }
  }
  for (int64_t p = 0; p < k; ++p) {
    const __m512 b0 = _mm512_maskz_loadu_ps(m0, b + p * ldb + n0);
    const __m512 b1 = _mm512_maskz_loadu_ps(m1, b + p * ldb + n0 + 16);
    for (int r = 0; r < MR; ++r) {
      const __m512 av = _mm512_set1_ps(a[r * lda + p]);
      acc0[r] = _mm512_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm512_fmadd_ps(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    _mm512_mask_storeu_ps(c + r * ldc + n0, m0, acc0[r]);
    _mm512_mask_storeu_ps(c + r * ldc + n0 + 16, m1, acc1[r]);
  }
}

inline void gemm_nn_f32_simd(int64_t m, int64_t n, int64_t k, const float* a,
                             int64_t lda, const float* b, int64_t ldb, float* c,
                             int64_t ldc, bool accumulate) {
  for (int64_t n0 = 0; n0 < n; n0 += 32) {
    const int64_t rem = std::min<int64_t>(32, n - n0);
    const __mmask16 m0 =
        rem >= 16 ? __mmask16(0xFFFF) : __mmask16((1u << rem) - 1);
    const __mmask16 m1 = rem <= 16 ? __mmask16(0)
                         : rem >= 32
                             ? __mmask16(0xFFFF)
                             : __mmask16((1u << (rem - 16)) - 1);
    int64_t i0 = 0;
    for (; i0 + 8 <= m; i0 += 8) {
      kernel_f32_512<8>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc,
                        ldc, accumulate);
    }
    switch (m - i0) {
      case 7: kernel_f32_512<7>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 6: kernel_f32_512<6>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 5: kernel_f32_512<5>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 4: kernel_f32_512<4>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 3: kernel_f32_512<3>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 2: kernel_f32_512<2>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 1: kernel_f32_512<1>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      default: break;
    }
  }
}

template <int MR>
inline void kernel_f64_512(int64_t n0, __mmask8 m0, __mmask8 m1, int64_t k,
                           const double* a, int64_t lda, const double* b,
                           int64_t ldb, double* c, int64_t ldc,
                           bool accumulate) {
  __m512d acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) {
    if (accumulate) {
      acc0[r] = _mm512_maskz_loadu_pd(m0, c + r * ldc + n0);
      acc1[r] = _mm512_maskz_loadu_pd(m1, c + r * ldc + n0 + 8);
    } else {
      acc0[r] = _mm512_setzero_pd();
      acc1[r] = _mm512_setzero_pd();
    }
  }
  for (int64_t p = 0; p < k; ++p) {
    const __m512d b0 = _mm512_maskz_loadu_pd(m0, b + p * ldb + n0);
    const __m512d b1 = _mm512_maskz_loadu_pd(m1, b + p * ldb + n0 + 8);
    for (int r = 0; r < MR; ++r) {
      const __m512d av = _mm512_set1_pd(a[r * lda + p]);
      acc0[r] = _mm512_fmadd_pd(av, b0, acc0[r]);
      acc1[r] = _mm512_fmadd_pd(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    _mm512_mask_storeu_pd(c + r * ldc + n0, m0, acc0[r]);
    _mm512_mask_storeu_pd(c + r * ldc + n0 + 8, m1, acc1[r]);
  }
}

inline void gemm_nn_f64_simd(int64_t m, int64_t n, int64_t k, const double* a,
                             int64_t lda, const double* b, int64_t ldb,
                             double* c, int64_t ldc, bool accumulate) {
  for (int64_t n0 = 0; n0 < n; n0 += 16) {
    const int64_t rem = std::min<int64_t>(16, n - n0);
    const __mmask8 m0 = rem >= 8 ? __mmask8(0xFF) : __mmask8((1u << rem) - 1);
    const __mmask8 m1 = rem <= 8 ? __mmask8(0)
                        : rem >= 16 ? __mmask8(0xFF)
                                    : __mmask8((1u << (rem - 8)) - 1);
    int64_t i0 = 0;
    for (; i0 + 8 <= m; i0 += 8) {
      kernel_f64_512<8>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc,
                        ldc, accumulate);
    }
    switch (m - i0) {
      case 7: kernel_f64_512<7>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 6: kernel_f64_512<6>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 5: kernel_f64_512<5>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 4: kernel_f64_512<4>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 3: kernel_f64_512<3>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 2: kernel_f64_512<2>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      case 1: kernel_f64_512<1>(n0, m0, m1, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc, accumulate); break;
      default: break;
    }
  }
}

#elif defined(__AVX2__) && defined(__FMA__)

template <int MR>
inline void kernel_f32_256(int64_t k, const float* a, int64_t lda,
                           const float* b, int64_t ldb, float* c, int64_t ldc,
                           bool accumulate) {
  __m256 acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) {
    if (accumulate) {
      acc0[r] = _mm256_loadu_ps(c + r * ldc);
      acc1[r] = _mm256_loadu_ps(c + r * ldc + 8);
    } else {
      acc0[r] = _mm256_setzero_ps();
      acc1[r] = _mm256_setzero_ps();
    }
  }
  for (int64_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
    const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_set1_ps(a[r * lda + p]);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    _mm256_storeu_ps(c + r * ldc, acc0[r]);
    _mm256_storeu_ps(c + r * ldc + 8, acc1[r]);
  }
}

inline void gemm_nn_f32_simd(int64_t m, int64_t n, int64_t k, const float* a,
                             int64_t lda, const float* b, int64_t ldb, float* c,
                             int64_t ldc, bool accumulate) {
  const int64_t n_main = n & ~int64_t(15);
  for (int64_t n0 = 0; n0 < n_main; n0 += 16) {
    int64_t i0 = 0;
    for (; i0 + 6 <= m; i0 += 6) {
      kernel_f32_256<6>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0,
                        ldc, accumulate);
    }
    switch (m - i0) {
      case 5: kernel_f32_256<5>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 4: kernel_f32_256<4>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 3: kernel_f32_256<3>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 2: kernel_f32_256<2>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 1: kernel_f32_256<1>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      default: break;
    }
  }
  if (n_main < n) {
    gemm_nn_scalar(m, n - n_main, k, a, lda, b + n_main, ldb, c + n_main, ldc,
                   accumulate);
  }
}

template <int MR>
inline void kernel_f64_256(int64_t k, const double* a, int64_t lda,
                           const double* b, int64_t ldb, double* c, int64_t ldc,
                           bool accumulate) {
  __m256d acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) {
    if (accumulate) {
      acc0[r] = _mm256_loadu_pd(c + r * ldc);
      acc1[r] = _mm256_loadu_pd(c + r * ldc + 4);
    } else {
      acc0[r] = _mm256_setzero_pd();
      acc1[r] = _mm256_setzero_pd();
    }
  }
  for (int64_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    for (int r = 0; r < MR; ++r) {
      const __m256d av = _mm256_set1_pd(a[r * lda + p]);
      acc0[r] = _mm256_fmadd_pd(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_pd(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    _mm256_storeu_pd(c + r * ldc, acc0[r]);
    _mm256_storeu_pd(c + r * ldc + 4, acc1[r]);
  }
}

inline void gemm_nn_f64_simd(int64_t m, int64_t n, int64_t k, const double* a,
                             int64_t lda, const double* b, int64_t ldb,
                             double* c, int64_t ldc, bool accumulate) {
  const int64_t n_main = n & ~int64_t(7);
  for (int64_t n0 = 0; n0 < n_main; n0 += 8) {
    int64_t i0 = 0;
    for (; i0 + 6 <= m; i0 += 6) {
      kernel_f64_256<6>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0,
                        ldc, accumulate);
    }
    switch (m - i0) {
      case 5: kernel_f64_256<5>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 4: kernel_f64_256<4>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 3: kernel_f64_256<3>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 2: kernel_f64_256<2>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      case 1: kernel_f64_256<1>(k, a + i0 * lda, lda, b + n0, ldb, c + i0 * ldc + n0, ldc, accumulate); break;
      default: break;
    }
  }
  if (n_main < n) {
    gemm_nn_scalar(m, n - n_main, k, a, lda, b + n_main, ldb, c + n_main, ldc,
                   accumulate);
  }
}

#endif  // SIMD paths

template <typename T>
inline void gemm_abt_generic(int64_t m, int64_t jn, int64_t n, const T* a,
                             int64_t lda, const T* b, int64_t ldb, T* c,
                             int64_t ldc, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < jn; ++j) {
      const T* ra = a + i * lda;
      const T* rb = b + j * ldb;
      // Four partial chains hide fma latency; order fixed per build.
      T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      int64_t p = 0;
      for (; p + 4 <= n; p += 4) {
        s0 = std::fma(ra[p + 0], rb[p + 0], s0);
        s1 = std::fma(ra[p + 1], rb[p + 1], s1);
        s2 = std::fma(ra[p + 2], rb[p + 2], s2);
        s3 = std::fma(ra[p + 3], rb[p + 3], s3);
      }
      T acc = (s0 + s1) + (s2 + s3);
      for (; p < n; ++p) acc = std::fma(ra[p], rb[p], acc);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + acc : acc;
    }
  }
}

#if defined(__AVX512F__)

// 4x4 register tile: a vector load feeds four accumulator rows, which cuts
// the streamed bytes per flop by ~4x versus plain row dots.
inline void gemm_abt_f32_tile(int64_t m, int64_t jn, int64_t n, const float* a,
                              int64_t lda, const float* b, int64_t ldb,
                              float* c, int64_t ldc, bool accumulate) {
  int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    int64_t j = 0;
    for (; j + 4 <= jn; j += 4) {
      __m512 acc[4][4];
      for (int r = 0; r < 4; ++r)
        for (int s = 0; s < 4; ++s) acc[r][s] = _mm512_setzero_ps();
      int64_t p = 0;
      for (; p + 16 <= n; p += 16) {
        __m512 av[4], bv[4];
        for (int r = 0; r < 4; ++r) av[r] = _mm512_loadu_ps(a + (i + r) * lda + p);
        for (int s = 0; s < 4; ++s) bv[s] = _mm512_loadu_ps(b + (j + s) * ldb + p);
        for (int r = 0; r < 4; ++r)
          for (int s = 0; s < 4; ++s)
            acc[r][s] = _mm512_fmadd_ps(av[r], bv[s], acc[r][s]);
      }
      for (int r = 0; r < 4; ++r) {
        for (int s = 0; s < 4; ++s) {
          float sum = _mm512_reduce_add_ps(acc[r][s]);
          for (int64_t q = p; q < n; ++q) {
            sum = std::fma(a[(i + r) * lda + q], b[(j + s) * ldb + q], sum);
          }
          float* dst = c + (i + r) * ldc + (j + s);
          *dst = accumulate ? *dst + sum : sum;
        }
      }
    }
    if (j < jn) {
      gemm_abt_generic<float>(4, jn - j, n, a + i * lda, lda, b + j * ldb, ldb,
                              c + i * ldc + j, ldc, accumulate);
    }
  }
  if (i < m) {
    gemm_abt_generic<float>(m - i, jn, n, a + i * lda, lda, b, ldb,
                            c + i * ldc, ldc, accumulate);
  }
}

inline void gemm_abt_f64_tile(int64_t m, int64_t jn, int64_t n, const double* a,
                              int64_t lda, const double* b, int64_t ldb,
                              double* c, int64_t ldc, bool accumulate) {
  int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    int64_t j = 0;
    for (; j + 4 <= jn; j += 4) {
      __m512d acc[4][4];
      for (int r = 0; r < 4; ++r)
        for (int s = 0; s < 4; ++s) acc[r][s] = _mm512_setzero_pd();
      int64_t p = 0;
      for (; p + 8 <= n; p += 8) {
        __m512d av[4], bv[4];
        for (int r = 0; r < 4; ++r) av[r] = _mm512_loadu_pd(a + (i + r) * lda + p);
        for (int s = 0; s < 4; ++s) bv[s] = _mm512_loadu_pd(b + (j + s) * ldb + p);
        for (int r = 0; r < 4; ++r)
          for (int s = 0; s < 4; ++s)
            acc[r][s] = _mm512_fmadd_pd(av[r], bv[s], acc[r][s]);
      }
      for (int r = 0; r < 4; ++r) {
        for (int s = 0; s < 4; ++s) {
          double sum = _mm512_reduce_add_pd(acc[r][s]);
          for (int64_t q = p; q < n; ++q) {
            sum = std::fma(a[(i + r) * lda + q], b[(j + s) * ldb + q], sum);
          }
          double* dst = c + (i + r) * ldc + (j + s);
          *dst = accumulate ? *dst + sum : sum;
        }
      }
    }
    if (j < jn) {
      gemm_abt_generic<double>(4, jn - j, n, a + i * lda, lda, b + j * ldb,
                               ldb, c + i * ldc + j, ldc, accumulate);
    }
  }
  if (i < m) {
    gemm_abt_generic<double>(m - i, jn, n, a + i * lda, lda, b, ldb,
                             c + i * ldc, ldc, accumulate);
  }
}

#endif  // __AVX512F__

}  // namespace

template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
             const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
  gemm_nn_scalar(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))
template <>
void gemm_nn<float>(int64_t m, int64_t n, int64_t k, const float* a,
                    int64_t lda, const float* b, int64_t ldb, float* c,
                    int64_t ldc, bool accumulate) {
  gemm_nn_f32_simd(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <>
void gemm_nn<double>(int64_t m, int64_t n, int64_t k, const double* a,
                     int64_t lda, const double* b, int64_t ldb, double* c,
                     int64_t ldc, bool accumulate) {
  gemm_nn_f64_simd(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
#endif

template <typename T>
void gemm_abt(int64_t m, int64_t j, int64_t n, const T* a, int64_t lda,
              const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
  gemm_abt_generic(m, j, n, a, lda, b, ldb, c, ldc, accumulate);
}

#if defined(__AVX512F__)
template <>
void gemm_abt<float>(int64_t m, int64_t j, int64_t n, const float* a,
                     int64_t lda, const float* b, int64_t ldb, float* c,
                     int64_t ldc, bool accumulate) {
  gemm_abt_f32_tile(m, j, n, a, lda, b, ldb, c, ldc, accumulate);
}

template <>
void gemm_abt<double>(int64_t m, int64_t j, int64_t n, const double* a,
                      int64_t lda, const double* b, int64_t ldb, double* c,
                      int64_t ldc, bool accumulate) {
  gemm_abt_f64_tile(m, j, n, a, lda, b, ldb, c, ldc, accumulate);
}
#endif

template <typename T>
void transpose(int64_t m, int64_t n, const T* src, int64_t lds, T* dst,
               int64_t ldd) {
  constexpr int64_t kBlock = 32;
  for (int64_t i0 = 0; i0 < m; i0 += kBlock) {
    const int64_t i1 = std::min(m, i0 + kBlock);
    for (int64_t j0 = 0; j0 < n; j0 += kBlock) {
      const int64_t j1 = std::min(n, j0 + kBlock);
      for (int64_t i = i0; i < i1; ++i) {
        for (int64_t j = j0; j < j1; ++j) {
          dst[j * ldd + i] = src[i * lds + j];
        }
      }
    }
  }
}

template void gemm_nn<float>(int64_t, int64_t, int64_t, const float*, int64_t,
                             const float*, int64_t, float*, int64_t, bool);
template void gemm_nn<double>(int64_t, int64_t, int64_t, const double*,
                              int64_t, const double*, int64_t, double*,
                              int64_t, bool);
template void gemm_abt<float>(int64_t, int64_t, int64_t, const float*, int64_t,
                              const float*, int64_t, float*, int64_t, bool);
template void gemm_abt<double>(int64_t, int64_t, int64_t, const double*,
                               int64_t, const double*, int64_t, double*,
                               int64_t, bool);
template void transpose<float>(int64_t, int64_t, const float*, int64_t, float*,
                               int64_t);
template void transpose<double>(int64_t, int64_t, const double*, int64_t,
                                double*, int64_t);

}  // namespace ulid
