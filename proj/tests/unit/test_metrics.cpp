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

#include <cmath>
#include <random>

#include "doctest.h"
#include "tasnet/metrics.hpp"
#include "test_util.hpp"

using namespace tasnet;
using tasnet::testing::RandomVector;
using tasnet::testing::RandomWave;

namespace {

// Textbook SI-SNR with the 1e-8 energy guard and no cap.
Real OracleSiSnr(std::vector<Real> x, std::vector<Real> s) {
  const auto centre = [](std::vector<Real> &v) {
    Real m = 0.0;
    for (Real a : v) m += a;
    m /= static_cast<Real>(v.size());
    for (Real &a : v) a -= m;
  };
  centre(x);
  centre(s);
  Real xs = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xs += x[i] * s[i];
    ss += s[i] * s[i];
  }
  Real t2 = 0.0, e2 = 0.0, x2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real t = xs / ss * s[i];
    t2 += t * t;
    e2 += (x[i] - t) * (x[i] - t);
    x2 += x[i] * x[i];
  }
  return 10.0 * std::log10(t2 / (e2 + 1e-8 * x2));
}

SeparatedSources Pair(Waveform a, Waveform b) {
  SeparatedSources s;
  s.estimates = {std::move(a), std::move(b)};
  return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("SI-SNR agrees with the textbook formula") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto s = RandomVector(300, rng);
    auto x = s;
    const auto n = RandomVector(300, rng, 0.3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.7 * x[i] + n[i];
    CHECK(SiSnr(x, s) == doctest::Approx(OracleSiSnr(x, s)).epsilon(1e-12));
  }
}

TEST_CASE("SI-SNR invariances") {
  std::mt19937_64 rng(2);
  const auto s = RandomVector(512, rng);
  auto x = s;
  const auto n = RandomVector(512, rng, 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += n[i];
  const Real base = SiSnr(x, s);
  for (Real a : {0.1, 2.0, 10.0}) {
    auto xs = x;
    for (Real &v : xs) v *= a;
    CHECK(std::abs(SiSnr(xs, s) - base) < 1e-6);
    auto xd = x;
    for (Real &v : xd) v += a;
    CHECK(std::abs(SiSnr(xd, s) - base) < 1e-6);
  }
}

TEST_CASE("SI-SNR caps and errors") {
  std::mt19937_64 rng(3);
  const auto s = RandomVector(64, rng);
  CHECK(SiSnr(s, s) == kDbCap);
  std::vector<Real> zero(64, 0.0);
  CHECK(SiSnr(zero, s) == -kDbCap);
  try {
    SiSnr(s, std::vector<Real>(64, 0.5));
    FAIL("constant reference accepted");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kUndefinedReference);
  }
  try {
    SiSnr(s, RandomVector(63, rng));
    FAIL("length mismatch accepted");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kAlignment);
  }
}

TEST_CASE("SI-SNR gradient matches central differences") {
  std::mt19937_64 rng(4);
  const auto s = RandomVector(40, rng);
  auto x = RandomVector(40, rng);
  std::vector<Real> g;
  SiSnrWithGrad(x, s, g);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real keep = x[i];
    x[i] = keep + 1e-6;
    const Real up = SiSnr(x, s);
    x[i] = keep - 1e-6;
    const Real down = SiSnr(x, s);
    x[i] = keep;
    CHECK(g[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-5));
  }
}

TEST_CASE("permutation search") {
  std::mt19937_64 rng(5);
  const Waveform s1 = RandomWave(256, rng), s2 = RandomWave(256, rng);
  const std::vector<Waveform> refs{s1, s2};
  const PitResult straight = PitLoss(Pair(s1, s2), refs);
  CHECK_FALSE(straight.swapped());
  const PitResult crossed = PitLoss(Pair(s2, s1), refs);
  CHECK(crossed.swapped());
  CHECK(crossed.loss == doctest::Approx(straight.loss));
  // identical scores keep the identity assignment
  const PitResult tie = PitLoss(Pair(s1, s1), std::vector<Waveform>{s1, s1});
  CHECK_FALSE(tie.swapped());
}

TEST_CASE("PIT gradient equals the chosen pair's SI-SNR gradient") {
  std::mt19937_64 rng(6);
  const Waveform s1 = RandomWave(128, rng), s2 = RandomWave(128, rng);
  Waveform e1 = s2, e2 = s1;
  for (Real &v : e1.samples) v += 0.01;
  const std::vector<Waveform> refs{s1, s2};
  std::vector<std::vector<Real>> d;
  const PitResult r = PitLossWithGrad(Pair(e1, e2), refs, d);
  REQUIRE(r.swapped());
  std::vector<Real> g;
  SiSnrWithGrad(e1.samples, s2.samples, g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(d[0][i] == doctest::Approx(-0.5 * g[i]));
}

TEST_CASE("projection decomposition") {
  std::mt19937_64 rng(7);
  const Waveform s1 = RandomWave(512, rng), s2 = RandomWave(512, rng);
  Waveform est = s1;
  const auto noise = RandomVector(512, rng, 0.05);
  for (std::size_t i = 0; i < 512; ++i) est.samples[i] += 0.3 * s2.samples[i] + noise[i];
  const std::vector<Waveform> refs{s1, s2};
  const DecompositionResult d = BssDecompose(est, refs, 0);
  Real mean = 0.0;
  for (Real v : est.samples) mean += v;
  mean /= 512.0;
  for (std::size_t i = 0; i < 512; ++i) {
    CHECK(d.s_target[i] + d.e_interf[i] + d.e_noise[i] + d.e_artif[i] ==
          doctest::Approx(est.samples[i] - mean).epsilon(1e-9));
    CHECK(d.e_noise[i] == 0.0);
  }
  // artefacts are orthogonal to both references
  CHECK(std::abs(Dot(d.e_artif, s1.samples)) < 1e-8);
  CHECK(d.si_sdr_db == doctest::Approx(SiSnr(est, s1)));
  CHECK(d.sdr_db > 0.0);

  const std::vector<Waveform> collinear{s1, s1};
  CHECK_THROWS_AS(BssDecompose(est, collinear, 0), Error);
  CHECK_THROWS_AS(BssDecompose(est, refs, 2), Error);
}

TEST_CASE("improvement over the mixture") {
  std::mt19937_64 rng(8);
  const Waveform s1 = RandomWave(400, rng), s2 = RandomWave(400, rng);
  Waveform mix = s1;
  for (std::size_t i = 0; i < 400; ++i) mix.samples[i] += s2.samples[i];
  const std::vector<Waveform> refs{s1, s2};
  const Real base = 0.5 * (SiSnr(mix, s1) + SiSnr(mix, s2));
  CHECK(SiSdrImprovement(mix, Pair(s1, s2), refs) == doctest::Approx(kDbCap - base));
  CHECK(SiSdrImprovement(mix, Pair(mix, mix), refs) == doctest::Approx(0.0).epsilon(1e-12));
}

}  // TEST_SUITE
