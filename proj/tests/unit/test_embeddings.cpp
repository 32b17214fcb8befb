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
#include "tasnet/embeddings.hpp"
#include "test_util.hpp"

using namespace tasnet;
using tasnet::testing::RandomVector;
using tasnet::testing::RandomWave;
using tasnet::testing::RelativeError;

namespace {

std::string FakeEmbedder() {
  return "python3 " + std::string(TASNET_TEST_DATA) + "/fake_embedder.py";
}

Waveform Tone(Real hz, std::size_t n, Real amp = 0.1, int rate = 8000) {
  std::vector<Real> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = amp * std::sin(2 * M_PI * hz * i / rate);
  return Waveform(s, rate);
}

// d(v . embed(x))/dx by central differences at a few positions.
void CheckBackendGradient(const EmbeddingBackend &backend, const Waveform &x,
                          std::mt19937_64 &rng, Real tol) {
  const std::size_t dim = backend.Embed(x).dimension();
  const auto v = RandomVector(dim, rng);
  const auto grad = backend.EmbedBackward(x, v);
  REQUIRE(grad.size() == x.size());
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  for (int k = 0; k < 12; ++k) {
    const std::size_t i = pick(rng);
    Waveform p = x, m = x;
    const Real h = 1e-6;
    p.samples[i] += h;
    m.samples[i] -= h;
    const Real numeric = (Dot(backend.Embed(p).values, v) - Dot(backend.Embed(m).values, v)) / (2 * h);
    CAPTURE(i);
    CHECK(RelativeError(grad[i], numeric, 1e-3) < tol);
  }
}

SeparatedSources Pair(Waveform a, Waveform b) {
  SeparatedSources s;
  s.estimates = {std::move(a), std::move(b)};
  return s;
}

}  // namespace

TEST_SUITE("embeddings") {

TEST_CASE("stub backend is deterministic and layer dependent") {
  std::mt19937_64 rng(1);
  const Waveform x = RandomWave(4000, rng);
  const StubBackend a(3, 2), b(3, 2), c(3, 5);
  const auto ea = a.Embed(x);
  CHECK(ea.dimension() == StubBackend::kDimension);
  CHECK(ea.values == b.Embed(x).values);
  CHECK(ea.values != c.Embed(x).values);
  CHECK(a.descriptor() == "stub:seed=3,layer=2");
  CHECK(a.FrozenWeights().size() == StubBackend::kDimension * 2 * StubBackend::kMelBands);
}

TEST_CASE("stub backend separates different spectra") {
  const StubBackend s(0);
  const auto low1 = s.Embed(Tone(200, 8000)), low2 = s.Embed(Tone(210, 8000, 0.3));
  const auto high = s.Embed(Tone(2500, 8000));
  CHECK(CosineSimilarity(low1, low2) > CosineSimilarity(low1, high));
}

TEST_CASE("stub backend rejects short input") {
  const StubBackend s(0);
  const std::size_t min = s.MinimumSamples(8000);
  CHECK(min == 200);
  std::mt19937_64 rng(2);
  CHECK_NOTHROW(s.Embed(RandomWave(min, rng)));
  try {
    s.Embed(RandomWave(min - 1, rng));
    FAIL("short input accepted");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kBackendLength);
  }
}

TEST_CASE("stub backward matches central differences") {
  std::mt19937_64 rng(3);
  const StubBackend s(7, 1);
  CheckBackendGradient(s, RandomWave(1000, rng, 0.2), rng, 1e-4);
}

TEST_CASE("half-band upsampler") {
  std::mt19937_64 rng(4);
  const auto x = RandomVector(300, rng);
  const auto y = Upsample2(x);
  REQUIRE(y.size() == 600);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[2 * i] == x[i]);
  // DC passes unchanged away from the edges
  const auto dc = Upsample2(std::vector<Real>(200, 1.0));
  for (std::size_t i = 40; i < 360; ++i) CHECK(dc[i] == doctest::Approx(1.0).epsilon(1e-9));
  // adjoint identity <U x, z> = <x, U* z>
  const auto z = RandomVector(600, rng);
  CHECK(Dot(y, z) == doctest::Approx(Dot(x, Upsample2Adjoint(z))).epsilon(1e-12));
}

TEST_CASE("backend descriptors") {
  CHECK(MakeBackend("stub")->descriptor() == "stub:seed=0,layer=0");
  CHECK(MakeBackend("stub:seed=4,layer=3")->descriptor() == "stub:seed=4,layer=3");
  CHECK_THROWS_AS(MakeBackend("stub:depth=2"), Error);
  CHECK_THROWS_AS(MakeBackend("wav2vec"), Error);
  CHECK_THROWS_AS(MakeBackend("transformer:layer=13", "true"), Error);
  CHECK_THROWS_AS(MakeBackend("transformer:layer=0", "true"), Error);
  if (std::getenv("TASNET_EMBEDDER_CMD") == nullptr) {
    try {
      MakeBackend("tdnn");
      FAIL("missing command accepted");
    } catch (const Error &e) {
      CHECK(e.kind() == ErrorKind::kBackendMissing);
    }
  }
}

TEST_CASE("external backend over the JSON-lines protocol") {
  const auto backend = MakeBackend("transformer:layer=2", FakeEmbedder());
  CHECK(backend->kind() == BackendKind::kExternalTransformer);
  CHECK(backend->layer() == 2);
  CHECK(backend->descriptor() == "transformer:layer=2");
  CHECK(backend->FrozenWeights().empty());
  // 400 samples at 16 kHz
  CHECK(backend->MinimumSamples(16000) == 400);
  CHECK(backend->MinimumSamples(8000) == 200);

  std::mt19937_64 rng(5);
  const Waveform x16 = RandomWave(500, rng, 0.3, 16000);
  const auto e = backend->Embed(x16);
  REQUIRE(e.dimension() == 4);
  Real r0 = 0.0;
  for (Real v : x16.samples) r0 += v * v;
  CHECK(e.values[0] == doctest::Approx(3.0 * r0));

  const Waveform x8 = RandomWave(300, rng, 0.3, 8000);
  const auto e8 = backend->Embed(x8);
  const auto up = Upsample2(x8.samples);
  Real u0 = 0.0;
  for (Real v : up) u0 += v * v;
  CHECK(e8.values[0] == doctest::Approx(3.0 * u0));

  CheckBackendGradient(*backend, x8, rng, 1e-5);
  CheckBackendGradient(*backend, x16, rng, 1e-5);

  try {
    backend->Embed(RandomWave(100, rng, 0.3, 16000));
    FAIL("short input accepted");
  } catch (const Error &err) {
    CHECK(err.kind() == ErrorKind::kBackendLength);
  }
  CHECK_THROWS_AS(backend->Embed(RandomWave(500, rng, 0.3, 22050)), Error);
}

TEST_CASE("external backend reports a dead process") {
  CHECK_THROWS_AS(MakeBackend("tdnn", "exit 3"), Error);
}

TEST_CASE("cosine similarity") {
  const std::vector<Real> a{1, 0, 0}, b{0, 2, 0}, c{-3, 0, 0};
  CHECK(CosineSimilarity(a, a) == doctest::Approx(1.0));
  CHECK(CosineSimilarity(a, b) == doctest::Approx(0.0));
  CHECK(CosineSimilarity(a, c) == doctest::Approx(-1.0));
  CHECK(CosineSimilarity(std::vector<Real>(3, 0.0), a) == 0.0);
  CHECK_THROWS_AS(CosineSimilarity(a, std::vector<Real>{1, 2}), Error);

  std::mt19937_64 rng(6);
  auto x1 = RandomVector(10, rng), x2 = RandomVector(10, rng);
  std::vector<Real> d1, d2;
  CosineSimilarityGrad(x1, x2, 1e-8, d1, d2);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const Real keep = x1[i];
    x1[i] = keep + 1e-6;
    const Real up = CosineSimilarity(x1, x2);
    x1[i] = keep - 1e-6;
    const Real down = CosineSimilarity(x1, x2);
    x1[i] = keep;
    CHECK(d1[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("similarity loss values") {
  CHECK(SimilarityLoss(0.0, 5.0) == doctest::Approx(5.0 * std::log(2.0)).epsilon(1e-12));
  for (Real w : {5.0, 10.0, 20.0}) CHECK(SimilarityLoss(-1.0, w) == 0.0);
  // fully similar estimates hit the clamp
  CHECK(SimilarityLoss(1.0, 5.0) == doctest::Approx(-5.0 * std::log(1e-8)));
  CHECK(SimilarityLossGrad(1.0, 5.0) == 0.0);
  CHECK(SimilarityLoss(0.3, 0.0) == 0.0);
  for (Real css : {-0.5, 0.0, 0.4, 0.9}) {
    const Real numeric = (SimilarityLoss(css + 1e-6, 10) - SimilarityLoss(css - 1e-6, 10)) / 2e-6;
    CHECK(SimilarityLossGrad(css, 10) == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("composite loss without the penalty is the PIT loss") {
  std::mt19937_64 rng(7);
  const Waveform s1 = RandomWave(800, rng), s2 = RandomWave(800, rng);
  const SeparatedSources est = Pair(RandomWave(800, rng), RandomWave(800, rng));
  const std::vector<Waveform> refs{s1, s2};
  SimilarityConfig cfg;
  cfg.weight_sl = 0.0;
  std::vector<std::vector<Real>> d, d_pit;
  const CompositeLossResult r = CompositeLoss(est, refs, cfg, nullptr, &d);
  const PitResult p = PitLossWithGrad(est, refs, d_pit);
  CHECK(r.total == p.loss);
  CHECK(d == d_pit);
  CHECK_FALSE(r.css_computed);

  const StubBackend stub(0);
  const CompositeLossResult with = CompositeLoss(est, refs, cfg, &stub, nullptr, true);
  CHECK(with.css_computed);
  CHECK(with.total == p.loss);

  cfg.weight_sl = 5.0;
  CHECK_THROWS_AS(CompositeLoss(est, refs, cfg, nullptr, nullptr), Error);
}

TEST_CASE("composite loss gradient") {
  std::mt19937_64 rng(8);
  const Waveform s1 = RandomWave(600, rng), s2 = RandomWave(600, rng);
  SeparatedSources est = Pair(RandomWave(600, rng), RandomWave(600, rng));
  const std::vector<Waveform> refs{s1, s2};
  SimilarityConfig cfg;
  cfg.weight_sl = 5.0;
  const StubBackend stub(1);
  std::vector<std::vector<Real>> d;
  const CompositeLossResult r = CompositeLoss(est, refs, cfg, &stub, &d);
  CHECK(r.total == doctest::Approx(r.pit.loss + r.similarity));
  CHECK(r.similarity == doctest::Approx(SimilarityLoss(r.css, 5.0)));
  std::uniform_int_distribution<std::size_t> pick(0, 599);
  for (int k = 0; k < 10; ++k) {
    const std::size_t c = static_cast<std::size_t>(k % 2), i = pick(rng);
    const Real keep = est.estimates[c].samples[i];
    est.estimates[c].samples[i] = keep + 1e-6;
    const Real up = CompositeLoss(est, refs, cfg, &stub, nullptr).total;
    est.estimates[c].samples[i] = keep - 1e-6;
    const Real down = CompositeLoss(est, refs, cfg, &stub, nullptr).total;
    est.estimates[c].samples[i] = keep;
    CHECK(RelativeError(d[c][i], (up - down) / 2e-6, 1e-3) < 1e-4);
  }
}

}  // TEST_SUITE
