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

// AArch64 only; NEON (with float64x2_t) is baseline there, so no runtime
// probe is needed.

#include <arm_neon.h>

#include "tasnet/simd/kernels.hpp"

namespace tasnet::simd {
namespace {

double DotNeon(const double *a, const double *b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void AxpyNeon(double *y, double alpha, const double *x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void CombineRowsNeon(double *out, std::size_t out_stride, const double *coeffs,
                     std::size_t coeff_stride, const double *rows,
                     std::size_t row_stride, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double *o = out + i * out_stride;
    const double *c = coeffs + i * coeff_stride;
    std::size_t t = 0;
    for (; t + 8 <= n; t += 8) {
      float64x2_t a0 = vdupq_n_f64(0.0), a1 = vdupq_n_f64(0.0);
      float64x2_t a2 = vdupq_n_f64(0.0), a3 = vdupq_n_f64(0.0);
      for (std::size_t j = 0; j < k; ++j) {
        const double *r = rows + j * row_stride + t;
        const float64x2_t cj = vdupq_n_f64(c[j]);
        a0 = vfmaq_f64(a0, cj, vld1q_f64(r));
        a1 = vfmaq_f64(a1, cj, vld1q_f64(r + 2));
        a2 = vfmaq_f64(a2, cj, vld1q_f64(r + 4));
        a3 = vfmaq_f64(a3, cj, vld1q_f64(r + 6));
      }
      vst1q_f64(o + t, vaddq_f64(vld1q_f64(o + t), a0));
      vst1q_f64(o + t + 2, vaddq_f64(vld1q_f64(o + t + 2), a1));
      vst1q_f64(o + t + 4, vaddq_f64(vld1q_f64(o + t + 4), a2));
      vst1q_f64(o + t + 6, vaddq_f64(vld1q_f64(o + t + 6), a3));
    }
    for (; t < n; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += c[j] * rows[j * row_stride + t];
      o[t] += s;
    }
  }
}

void CrossDotsNeon(double *out, std::size_t out_stride, const double *a,
                   std::size_t a_stride, const double *b, std::size_t b_stride,
                   std::size_t m, std::size_t n, std::size_t len) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * out_stride + j] += DotNeon(a + i * a_stride, b + j * b_stride, len);
    }
  }
}

void MultiplyNeon(double *out, const double *a, const double *b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

}  // namespace

const KernelTable &NeonKernelTable() {
  static const KernelTable table{
      Isa::kNeon,       "neon",         &DotNeon, &AxpyNeon,
      &CombineRowsNeon, &CrossDotsNeon, &MultiplyNeon,
  };
  return table;
}

}  // namespace tasnet::simd
