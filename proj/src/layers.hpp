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

// Forward/backward pairs for the separator's building blocks. Backward
// functions accumulate (+=) into every gradient they receive.

#pragma once

#include <span>
#include <vector>

#include "tasnet/model.hpp"
#include "tasnet/tensor.hpp"

namespace tasnet::layers {

inline constexpr Real kNormEps = 1e-8;

// out = weight[out x in] * in + bias
void PointwiseConv(const Real *weight, const Real *bias, const Matrix &in,
                   Matrix &out);
// d_in may be null when the input gradient is not needed.
void PointwiseConvBackward(const Real *weight, const Matrix &in,
                           const Matrix &d_out, Matrix *d_in, Real *d_weight,
                           Real *d_bias);

// Per-channel dilated convolution, "same" output length, zero padding split
// as floor((P-1)*d/2) on the left.
void DepthwiseConv(const Real *weight, const Real *bias, int kernel,
                   int dilation, const Matrix &in, Matrix &out);
void DepthwiseConvBackward(const Real *weight, int kernel, int dilation,
                           const Matrix &in, const Matrix &d_out, Matrix &d_in,
                           Real *d_weight, Real *d_bias);

void PRelu(Real alpha, const Matrix &in, Matrix &out);
void PReluBackward(Real alpha, const Matrix &in, const Matrix &d_out,
                   Matrix &d_in, Real *d_alpha);

struct NormState {
  Matrix input;
  Matrix normalized;        // (x - mean) * inv_std, before the affine step
  std::vector<Real> mean;     // 1 entry (global) or one per frame
  std::vector<Real> inv_std;  // same length as mean
};

void Norm(NormKind kind, const Real *gamma, const Real *beta, const Matrix &in,
          Matrix &out, NormState &state);
void NormBackward(NormKind kind, const Real *gamma, const NormState &state,
                  const Matrix &d_out, Matrix &d_in, Real *d_gamma,
                  Real *d_beta);

}  // namespace tasnet::layers
