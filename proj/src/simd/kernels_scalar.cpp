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

#include "tasnet/simd/kernels.hpp"

namespace tasnet::simd {
namespace {

double DotScalar(const double *a, const double *b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void AxpyScalar(double *y, double alpha, const double *x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void CombineRowsScalar(double *out, std::size_t out_stride,
                       const double *coeffs, std::size_t coeff_stride,
                       const double *rows, std::size_t row_stride,
                       std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double *o = out + i * out_stride;
    const double *c = coeffs + i * coeff_stride;
    for (std::size_t t = 0; t < n; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += c[j] * rows[j * row_stride + t];
      o[t] += acc;
    }
  }
}

void CrossDotsScalar(double *out, std::size_t out_stride, const double *a,
                     std::size_t a_stride, const double *b,
                     std::size_t b_stride, std::size_t m, std::size_t n,
                     std::size_t len) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * out_stride + j] +=
          DotScalar(a + i * a_stride, b + j * b_stride, len);
    }
  }
}

void MultiplyScalar(double *out, const double *a, const double *b,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

}  // namespace

const KernelTable &ScalarKernels() {
  static const KernelTable table{
      Isa::kScalar,     "scalar",        &DotScalar, &AxpyScalar,
      &CombineRowsScalar, &CrossDotsScalar, &MultiplyScalar,
  };
  return table;
}

}  // namespace tasnet::simd
