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

#include "tasnet/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "tasnet/simd/kernels.hpp"

namespace tasnet {

void Matrix::SetZero() { std::fill(data_.begin(), data_.end(), 0.0); }

void GemmNN(Matrix &out, ConstMat a, ConstMat b) {
  if (a.cols != b.rows || out.rows() != a.rows || out.cols() != b.cols) {
    Throw(ErrorKind::kShape, "GemmNN: incompatible shapes");
  }
  simd::Active().combine_rows(out.data(), out.cols(), a.data, a.cols, b.data,
                              b.cols, a.rows, a.cols, b.cols);
}

void GemmTN(Matrix &out, ConstMat a, ConstMat b) {
  if (a.rows != b.rows || out.rows() != a.cols || out.cols() != b.cols) {
    Throw(ErrorKind::kShape, "GemmTN: incompatible shapes");
  }
  // Weight operands are small; transposing once keeps the kernel streaming
  // along the long frame axis.
  std::vector<Real> at(a.rows * a.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) at[c * a.rows + r] = a.data[r * a.cols + c];
  }
  simd::Active().combine_rows(out.data(), out.cols(), at.data(), a.rows,
                              b.data, b.cols, a.cols, a.rows, b.cols);
}

void GemmNT(Real *out, ConstMat a, ConstMat b) {
  if (a.cols != b.cols) Throw(ErrorKind::kShape, "GemmNT: incompatible shapes");
  simd::Active().cross_dots(out, b.rows, a.data, a.cols, b.data, b.cols,
                            a.rows, b.rows, a.cols);
}

Real Dot(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) Throw(ErrorKind::kShape, "Dot: length mismatch");
  return simd::Active().dot(a.data(), b.data(), a.size());
}

void Axpy(std::span<Real> y, Real alpha, std::span<const Real> x) {
  if (y.size() != x.size()) Throw(ErrorKind::kShape, "Axpy: length mismatch");
  simd::Active().axpy(y.data(), alpha, x.data(), x.size());
}

std::size_t ParamStore::Add(std::string name, std::vector<std::size_t> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  ParamSlot s{std::move(name), std::move(shape), values_.size(), n};
  values_.resize(values_.size() + n, 0.0);
  slots_.push_back(std::move(s));
  return slots_.size() - 1;
}

std::optional<std::size_t> ParamStore::Find(const std::string &name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return i;
  }
  return std::nullopt;
}

bool ParamStore::SameLayout(const ParamStore &other) const {
  if (slots_.size() != other.slots_.size()) return false;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name != other.slots_[i].name ||
        slots_[i].shape != other.slots_[i].shape) {
      return false;
    }
  }
  return true;
}

}  // namespace tasnet
