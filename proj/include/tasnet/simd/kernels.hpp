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

// Dense double-precision inner loops used by the separator, the decoder and
// the stub embedder. Each instruction set provides one KernelTable; the
// scalar table is the reference every other table is tested against.

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace tasnet::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  std::string_view name;

  double (*dot)(const double *a, const double *b, std::size_t n);

  // y[t] += alpha * x[t]
  void (*axpy)(double *y, double alpha, const double *x, std::size_t n);

  // out[i, t] += sum_j coeffs[i, j] * rows[j, t]   (i < m, j < k, t < n)
  // This is C += A * B with B and C traversed along their contiguous axis.
  void (*combine_rows)(double *out, std::size_t out_stride,
                       const double *coeffs, std::size_t coeff_stride,
                       const double *rows, std::size_t row_stride,
                       std::size_t m, std::size_t k, std::size_t n);

  // out[i, j] += sum_t a[i, t] * b[j, t]   (i < m, j < n, t < len)
  void (*cross_dots)(double *out, std::size_t out_stride,
                     const double *a, std::size_t a_stride,
                     const double *b, std::size_t b_stride,
                     std::size_t m, std::size_t n, std::size_t len);

  // out[t] = a[t] * b[t]
  void (*multiply)(double *out, const double *a, const double *b,
                   std::size_t n);
};

const KernelTable &ScalarKernels();

// Null when the build or the running CPU lacks the instruction set.
const KernelTable *Avx2Kernels();
const KernelTable *NeonKernels();

// Every table usable on this machine, scalar first.
std::vector<const KernelTable *> AvailableKernels();

// The table used by the library. Chosen once at startup: the widest
// supported instruction set, unless TASNET_SIMD=scalar|avx2|neon says
// otherwise.
const KernelTable &Active();

// Test hook. Returns false if the requested set is unavailable.
bool SetActive(Isa isa);

}  // namespace tasnet::simd
