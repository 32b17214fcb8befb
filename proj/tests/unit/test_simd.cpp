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

#include <random>

#include "doctest.h"
#include "tasnet/simd/kernels.hpp"
#include "test_util.hpp"

using namespace tasnet;
using tasnet::testing::RandomVector;

namespace {

void CheckClose(const std::vector<double> &a, const std::vector<double> &b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(a[i])));
  }
}

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("scalar table is always available and listed first") {
  const auto all = simd::AvailableKernels();
  REQUIRE(!all.empty());
  CHECK(all.front()->isa == simd::Isa::kScalar);
  CHECK(&simd::ScalarKernels() == all.front());
}

TEST_CASE("every table matches the scalar reference") {
  const simd::KernelTable &ref = simd::ScalarKernels();
  std::mt19937_64 rng(7);
  for (const simd::KernelTable *k : simd::AvailableKernels()) {
    CAPTURE(k->name);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 63u, 130u}) {
      CAPTURE(n);
      const auto a = RandomVector(n, rng), b = RandomVector(n, rng);
      CHECK(k->dot(a.data(), b.data(), n) ==
            doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12));

      auto y1 = RandomVector(n, rng);
      auto y2 = y1;
      ref.axpy(y1.data(), 0.37, a.data(), n);
      k->axpy(y2.data(), 0.37, a.data(), n);
      CheckClose(y1, y2, 1e-14);

      std::vector<double> p1(n), p2(n);
      ref.multiply(p1.data(), a.data(), b.data(), n);
      k->multiply(p2.data(), a.data(), b.data(), n);
      CheckClose(p1, p2, 0.0);

      // Non-trivial strides: operands are sub-blocks of wider buffers.
      const std::size_t m = 5, kk = 6, stride = n + 3;
      const auto coeffs = RandomVector(m * (kk + 2), rng);
      const auto rows = RandomVector(kk * stride, rng);
      auto o1 = RandomVector(m * stride, rng);
      auto o2 = o1;
      ref.combine_rows(o1.data(), stride, coeffs.data(), kk + 2, rows.data(), stride, m, kk, n);
      k->combine_rows(o2.data(), stride, coeffs.data(), kk + 2, rows.data(), stride, m, kk, n);
      CheckClose(o1, o2, 1e-12);

      const auto ma = RandomVector(m * stride, rng);
      const auto mb = RandomVector(kk * stride, rng);
      auto c1 = RandomVector(m * (kk + 1), rng);
      auto c2 = c1;
      ref.cross_dots(c1.data(), kk + 1, ma.data(), stride, mb.data(), stride, m, kk, n);
      k->cross_dots(c2.data(), kk + 1, ma.data(), stride, mb.data(), stride, m, kk, n);
      CheckClose(c1, c2, 1e-12);
    }
  }
}

TEST_CASE("SetActive switches tables and rejects unavailable ones") {
  const simd::Isa before = simd::Active().isa;
  CHECK(simd::SetActive(simd::Isa::kScalar));
  CHECK(simd::Active().isa == simd::Isa::kScalar);
  if (simd::NeonKernels() == nullptr) CHECK_FALSE(simd::SetActive(simd::Isa::kNeon));
  if (simd::Avx2Kernels() == nullptr) CHECK_FALSE(simd::SetActive(simd::Isa::kAvx2));
  CHECK(simd::SetActive(before));
}

}  // TEST_SUITE
