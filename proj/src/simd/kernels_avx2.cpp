// Copyright (c) 2026 The tasnet Authors. All Rights Reserved.
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

// Built with -mavx2 -mfma. Nothing in here may run before the dispatcher has
// confirmed CPU support.

#include <immintrin.h>

#include "tasnet/simd/kernels.hpp"

namespace tasnet::simd {
namespace {

inline double HorizontalSum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double DotAvx2(const double *a, const double *b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = HorizontalSum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void AxpyAvx2(double *y, double alpha, const double *x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// One output row, columns [t, t + 8).
inline void CombineOneRow8(double *o, const double *c, const double *rows,
                           std::size_t row_stride, std::size_t k) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (std::size_t j = 0; j < k; ++j) {
    const double *r = rows + j * row_stride;
    __m256d cj = _mm256_broadcast_sd(c + j);
    acc0 = _mm256_fmadd_pd(cj, _mm256_loadu_pd(r), acc0);
    acc1 = _mm256_fmadd_pd(cj, _mm256_loadu_pd(r + 4), acc1);
  }
  _mm256_storeu_pd(o, _mm256_add_pd(_mm256_loadu_pd(o), acc0));
  _mm256_storeu_pd(o + 4, _mm256_add_pd(_mm256_loadu_pd(o + 4), acc1));
}

void CombineRowsAvx2(double *out, std::size_t out_stride, const double *coeffs,
                     std::size_t coeff_stride, const double *rows,
                     std::size_t row_stride, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t i = 0;
  // 4 output rows x 8 columns: 8 accumulators, each loaded row feeds 4 FMAs.
  for (; i + 4 <= m; i += 4) {
    double *o0 = out + (i + 0) * out_stride;
    double *o1 = out + (i + 1) * out_stride;
    double *o2 = out + (i + 2) * out_stride;
    double *o3 = out + (i + 3) * out_stride;
    const double *c0 = coeffs + (i + 0) * coeff_stride;
    const double *c1 = coeffs + (i + 1) * coeff_stride;
    const double *c2 = coeffs + (i + 2) * coeff_stride;
    const double *c3 = coeffs + (i + 3) * coeff_stride;
    std::size_t t = 0;
    for (; t + 8 <= n; t += 8) {
      __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd();
      __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd();
      __m256d a20 = _mm256_setzero_pd(), a21 = _mm256_setzero_pd();
      __m256d a30 = _mm256_setzero_pd(), a31 = _mm256_setzero_pd();
      for (std::size_t j = 0; j < k; ++j) {
        const double *r = rows + j * row_stride + t;
        __m256d r0 = _mm256_loadu_pd(r);
        __m256d r1 = _mm256_loadu_pd(r + 4);
        __m256d b0 = _mm256_broadcast_sd(c0 + j);
        __m256d b1 = _mm256_broadcast_sd(c1 + j);
        __m256d b2 = _mm256_broadcast_sd(c2 + j);
        __m256d b3 = _mm256_broadcast_sd(c3 + j);
        a00 = _mm256_fmadd_pd(b0, r0, a00);
        a01 = _mm256_fmadd_pd(b0, r1, a01);
        a10 = _mm256_fmadd_pd(b1, r0, a10);
        a11 = _mm256_fmadd_pd(b1, r1, a11);
        a20 = _mm256_fmadd_pd(b2, r0, a20);
        a21 = _mm256_fmadd_pd(b2, r1, a21);
        a30 = _mm256_fmadd_pd(b3, r0, a30);
        a31 = _mm256_fmadd_pd(b3, r1, a31);
      }
      _mm256_storeu_pd(o0 + t, _mm256_add_pd(_mm256_loadu_pd(o0 + t), a00));
      _mm256_storeu_pd(o0 + t + 4, _mm256_add_pd(_mm256_loadu_pd(o0 + t + 4), a01));
      _mm256_storeu_pd(o1 + t, _mm256_add_pd(_mm256_loadu_pd(o1 + t), a10));
      _mm256_storeu_pd(o1 + t + 4, _mm256_add_pd(_mm256_loadu_pd(o1 + t + 4), a11));
      _mm256_storeu_pd(o2 + t, _mm256_add_pd(_mm256_loadu_pd(o2 + t), a20));
      _mm256_storeu_pd(o2 + t + 4, _mm256_add_pd(_mm256_loadu_pd(o2 + t + 4), a21));
      _mm256_storeu_pd(o3 + t, _mm256_add_pd(_mm256_loadu_pd(o3 + t), a30));
      _mm256_storeu_pd(o3 + t + 4, _mm256_add_pd(_mm256_loadu_pd(o3 + t + 4), a31));
    }
    for (; t < n; ++t) {
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double r = rows[j * row_stride + t];
        s0 += c0[j] * r;
        s1 += c1[j] * r;
        s2 += c2[j] * r;
        s3 += c3[j] * r;
      }
      o0[t] += s0;
      o1[t] += s1;
      o2[t] += s2;
      o3[t] += s3;
    }
  }
  for (; i < m; ++i) {
    double *o = out + i * out_stride;
    const double *c = coeffs + i * coeff_stride;
    std::size_t t = 0;
    for (; t + 8 <= n; t += 8) CombineOneRow8(o + t, c, rows + t, row_stride, k);
    for (; t < n; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += c[j] * rows[j * row_stride + t];
      o[t] += s;
    }
  }
}

void CrossDotsAvx2(double *out, std::size_t out_stride, const double *a,
                   std::size_t a_stride, const double *b, std::size_t b_stride,
                   std::size_t m, std::size_t n, std::size_t len) {
  for (std::size_t i = 0; i < m; ++i) {
    const double *ai = a + i * a_stride;
    double *oi = out + i * out_stride;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double *b0 = b + (j + 0) * b_stride;
      const double *b1 = b + (j + 1) * b_stride;
      const double *b2 = b + (j + 2) * b_stride;
      const double *b3 = b + (j + 3) * b_stride;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t t = 0;
      for (; t + 4 <= len; t += 4) {
        __m256d va = _mm256_loadu_pd(ai + t);
        s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + t), s0);
        s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + t), s1);
        s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + t), s2);
        s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + t), s3);
      }
      double r0 = HorizontalSum(s0), r1 = HorizontalSum(s1);
      double r2 = HorizontalSum(s2), r3 = HorizontalSum(s3);
      for (; t < len; ++t) {
        r0 += ai[t] * b0[t];
        r1 += ai[t] * b1[t];
        r2 += ai[t] * b2[t];
        r3 += ai[t] * b3[t];
      }
      oi[j] += r0;
      oi[j + 1] += r1;
      oi[j + 2] += r2;
      oi[j + 3] += r3;
    }
    for (; j < n; ++j) oi[j] += DotAvx2(ai, b + j * b_stride, len);
  }
}

void MultiplyAvx2(double *out, const double *a, const double *b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

}  // namespace

const KernelTable &Avx2KernelTable() {
  static const KernelTable table{
      Isa::kAvx2,       "avx2",         &DotAvx2, &AxpyAvx2,
      &CombineRowsAvx2, &CrossDotsAvx2, &MultiplyAvx2,
  };
  return table;
}

}  // namespace tasnet::simd
