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

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tasnet/common.hpp"

namespace tasnet {

/// Row-major dense matrix. Feature maps are stored [channels x frames] so
/// that the frame axis is contiguous.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  Real *data() { return data_.data(); }
  const Real *data() const { return data_.data(); }
  Real *row(std::size_t r) { return data_.data() + r * cols_; }
  const Real *row(std::size_t r) const { return data_.data() + r * cols_; }
  Real &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> span() { return data_; }
  std::span<const Real> span() const { return data_; }
  std::vector<Real> &storage() { return data_; }
  const std::vector<Real> &storage() const { return data_; }

  void SetZero();

  friend bool operator==(const Matrix &, const Matrix &) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

// Weight matrices live inside a flat parameter buffer, so the products take
// raw row-major operands with explicit shapes.
struct ConstMat {
  const Real *data;
  std::size_t rows;
  std::size_t cols;
};

inline ConstMat View(const Matrix &m) { return {m.data(), m.rows(), m.cols()}; }

// out += a * b
void GemmNN(Matrix &out, ConstMat a, ConstMat b);
// out += a^T * b
void GemmTN(Matrix &out, ConstMat a, ConstMat b);
// out(rows(a) x rows(b)) += a * b^T, written into a raw row-major buffer.
void GemmNT(Real *out, ConstMat a, ConstMat b);

Real Dot(std::span<const Real> a, std::span<const Real> b);
void Axpy(std::span<Real> y, Real alpha, std::span<const Real> x);

struct ParamSlot {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Named tensors packed into one contiguous buffer. The optimizer, the
/// checkpoint writer and the gradient checks all work on the flat buffer;
/// layers address their tensors by slot index.
class ParamStore {
 public:
  std::size_t Add(std::string name, std::vector<std::size_t> shape);

  std::size_t total_size() const { return values_.size(); }
  std::size_t num_slots() const { return slots_.size(); }
  const ParamSlot &slot(std::size_t i) const { return slots_[i]; }
  const std::vector<ParamSlot> &slots() const { return slots_; }
  std::optional<std::size_t> Find(const std::string &name) const;

  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }
  std::span<Real> tensor(std::size_t i) {
    return {values_.data() + slots_[i].offset, slots_[i].size};
  }
  std::span<const Real> tensor(std::size_t i) const {
    return {values_.data() + slots_[i].offset, slots_[i].size};
  }
  Real *ptr(std::size_t i) { return values_.data() + slots_[i].offset; }
  const Real *ptr(std::size_t i) const { return values_.data() + slots_[i].offset; }

  bool SameLayout(const ParamStore &other) const;

 private:
  std::vector<ParamSlot> slots_;
  std::vector<Real> values_;
};

}  // namespace tasnet
