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

#include <functional>
#include <random>

#include "doctest.h"
#include "layers.hpp"
#include "test_util.hpp"

using namespace tasnet;
using tasnet::testing::RandomVector;
using tasnet::testing::RelativeError;

namespace {

Matrix RandomMatrix(std::size_t r, std::size_t c, std::mt19937_64 &rng) {
  Matrix m(r, c);
  m.storage() = RandomVector(r * c, rng);
  return m;
}

Real Weighted(const Matrix &out, const Matrix &w) {
  return Dot(out.span(), w.span());
}

// Central differences of loss() with respect to every entry of x.
std::vector<Real> NumericGrad(std::vector<Real> &x, const std::function<Real()> &loss,
                              Real h = 1e-6) {
  std::vector<Real> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real keep = x[i];
    x[i] = keep + h;
    const Real up = loss();
    x[i] = keep - h;
    const Real down = loss();
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

void CheckGrad(const std::vector<Real> &analytic, const std::vector<Real> &numeric) {
  REQUIRE(analytic.size() == numeric.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    CAPTURE(i);
    CHECK(RelativeError(analytic[i], numeric[i], 1e-4) < 1e-5);
  }
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("pointwise convolution matches a direct sum and its gradient") {
  std::mt19937_64 rng(1);
  const std::size_t in_ch = 4, out_ch = 3, frames = 9;
  Matrix in = RandomMatrix(in_ch, frames, rng);
  auto w = RandomVector(out_ch * in_ch, rng), b = RandomVector(out_ch, rng);
  const Matrix wt = RandomMatrix(out_ch, frames, rng);
  Matrix out(out_ch, frames);
  layers::PointwiseConv(w.data(), b.data(), in, out);
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t t = 0; t < frames; ++t) {
      Real s = b[o];
      for (std::size_t i = 0; i < in_ch; ++i) s += w[o * in_ch + i] * in(i, t);
      CHECK(out(o, t) == doctest::Approx(s).epsilon(1e-12));
    }
  }
  Matrix d_in(in_ch, frames);
  std::vector<Real> dw(w.size()), db(b.size());
  layers::PointwiseConvBackward(w.data(), in, wt, &d_in, dw.data(), db.data());
  const auto loss = [&] {
    Matrix o(out_ch, frames);
    layers::PointwiseConv(w.data(), b.data(), in, o);
    return Weighted(o, wt);
  };
  CheckGrad(dw, NumericGrad(w, loss));
  CheckGrad(db, NumericGrad(b, loss));
  CheckGrad(d_in.storage(), NumericGrad(in.storage(), loss));
}

TEST_CASE("depthwise convolution keeps length and has exact gradients") {
  std::mt19937_64 rng(2);
  for (int dilation : {1, 2, 4}) {
    for (int kernel : {2, 3}) {
      CAPTURE(dilation);
      CAPTURE(kernel);
      const std::size_t ch = 3, frames = 11;
      Matrix in = RandomMatrix(ch, frames, rng);
      auto w = RandomVector(ch * kernel, rng), b = RandomVector(ch, rng);
      const Matrix wt = RandomMatrix(ch, frames, rng);
      Matrix out(ch, frames);
      layers::DepthwiseConv(w.data(), b.data(), kernel, dilation, in, out);
      // direct evaluation with zero padding floor((P-1)d/2) on the left
      const long left = (kernel - 1) * dilation / 2;
      for (std::size_t c = 0; c < ch; ++c) {
        for (long t = 0; t < static_cast<long>(frames); ++t) {
          Real s = b[c];
          for (int p = 0; p < kernel; ++p) {
            const long src = t + p * dilation - left;
            if (src >= 0 && src < static_cast<long>(frames)) s += w[c * kernel + p] * in(c, src);
          }
          CHECK(out(c, t) == doctest::Approx(s).epsilon(1e-12));
        }
      }
      Matrix d_in(ch, frames);
      std::vector<Real> dw(w.size()), db(b.size());
      layers::DepthwiseConvBackward(w.data(), kernel, dilation, in, wt, d_in, dw.data(),
                                    db.data());
      const auto loss = [&] {
        Matrix o(ch, frames);
        layers::DepthwiseConv(w.data(), b.data(), kernel, dilation, in, o);
        return Weighted(o, wt);
      };
      CheckGrad(dw, NumericGrad(w, loss));
      CheckGrad(db, NumericGrad(b, loss));
      CheckGrad(d_in.storage(), NumericGrad(in.storage(), loss));
    }
  }
}

TEST_CASE("PReLU gradient") {
  std::mt19937_64 rng(3);
  Matrix in = RandomMatrix(3, 7, rng);
  const Matrix wt = RandomMatrix(3, 7, rng);
  std::vector<Real> alpha{0.25};
  Matrix d_in(3, 7);
  Real d_alpha = 0.0;
  layers::PReluBackward(alpha[0], in, wt, d_in, &d_alpha);
  const auto loss = [&] {
    Matrix o(3, 7);
    layers::PRelu(alpha[0], in, o);
    return Weighted(o, wt);
  };
  CheckGrad({d_alpha}, NumericGrad(alpha, loss));
  CheckGrad(d_in.storage(), NumericGrad(in.storage(), loss));
}

TEST_CASE("normalisation statistics and gradients") {
  std::mt19937_64 rng(4);
  for (NormKind kind : {NormKind::kGlobal, NormKind::kCumulative}) {
    CAPTURE(ToString(kind));
    const std::size_t ch = 4, frames = 6;
    Matrix in = RandomMatrix(ch, frames, rng);
    auto gamma = RandomVector(ch, rng), beta = RandomVector(ch, rng);
    const Matrix wt = RandomMatrix(ch, frames, rng);
    layers::NormState st;
    Matrix out(ch, frames);
    std::vector<Real> ones(ch, 1.0), zeros(ch, 0.0);
    layers::Norm(kind, ones.data(), zeros.data(), in, out, st);
    if (kind == NormKind::kGlobal) {
      Real mean = 0.0, sq = 0.0;
      for (Real v : out.storage()) mean += v;
      mean /= static_cast<Real>(out.size());
      for (Real v : out.storage()) sq += (v - mean) * (v - mean);
      CHECK(std::abs(mean) < 1e-12);
      CHECK(sq / static_cast<Real>(out.size()) == doctest::Approx(1.0).epsilon(1e-6));
    } else {
      // the first frame only sees itself
      Real m0 = 0.0;
      for (std::size_t c = 0; c < ch; ++c) m0 += out(c, 0);
      CHECK(std::abs(m0) < 1e-12);
      // later frames never depend on the future
      Matrix in2 = in;
      in2(0, frames - 1) += 5.0;
      Matrix out2(ch, frames);
      layers::NormState st2;
      layers::Norm(kind, ones.data(), zeros.data(), in2, out2, st2);
      for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t t = 0; t + 1 < frames; ++t) CHECK(out2(c, t) == out(c, t));
      }
    }
    layers::Norm(kind, gamma.data(), beta.data(), in, out, st);
    Matrix d_in(ch, frames);
    std::vector<Real> dg(ch), dbeta(ch);
    layers::NormBackward(kind, gamma.data(), st, wt, d_in, dg.data(), dbeta.data());
    const auto loss = [&] {
      Matrix o(ch, frames);
      layers::NormState s;
      layers::Norm(kind, gamma.data(), beta.data(), in, o, s);
      return Weighted(o, wt);
    };
    CheckGrad(dg, NumericGrad(gamma, loss));
    CheckGrad(dbeta, NumericGrad(beta, loss));
    CheckGrad(d_in.storage(), NumericGrad(in.storage(), loss));
  }
}

}  // TEST_SUITE
