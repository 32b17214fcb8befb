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
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"
#include "tasnet/streaming.hpp"
#include "test_util.hpp"

using namespace tasnet;
using tasnet::testing::RandomVector;
using tasnet::testing::RandomWave;
using tasnet::testing::TempDir;

namespace {

// Clean pair of 30 one-second segments; `misplaced` segments get a
// distance of exactly `d` on channel 0.
std::array<Waveform, 2> Delivery(const std::array<Waveform, 2> &clean, std::vector<int> misplaced,
                                 Real d) {
  std::array<Waveform, 2> out = clean;
  for (int k : misplaced) out[0].samples[static_cast<std::size_t>(k) * 8000] += d;
  return out;
}

std::array<Waveform, 2> CleanPair(std::size_t seconds, std::mt19937_64 &rng) {
  return {RandomWave(seconds * 8000, rng, 0.05), RandomWave(seconds * 8000, rng, 0.05)};
}

SeparatedSources Pair(Waveform a, Waveform b) {
  SeparatedSources s;
  s.estimates = {std::move(a), std::move(b)};
  return s;
}

Waveform Harmonic(Real f0, std::size_t n, Real amp = 0.1) {
  std::vector<Real> s(n, 0.0);
  for (int h = 1; h * f0 < 3800; ++h) {
    for (std::size_t i = 0; i < n; ++i) s[i] += amp / h * std::sin(2 * M_PI * h * f0 * i / 8000.0);
  }
  return Waveform(s, 8000);
}

SeparatorConfig Small() {
  SeparatorConfig c = SeparatorConfig::Toy();
  c.num_filters = 16;
  c.bottleneck = 8;
  c.conv_channels = 16;
  c.blocks_per_repeat = 2;
  return c;
}

}  // namespace

TEST_SUITE("streaming") {

TEST_CASE("segmentation") {
  std::mt19937_64 rng(1);
  const auto s30 = SegmentStream(RandomWave(240000, rng), 2.0);
  REQUIRE(s30.size() == 15);
  for (std::size_t i = 0; i < s30.size(); ++i) {
    CHECK(s30[i].index == static_cast<int>(i));
    CHECK(s30[i].audio.size() == 16000);
    CHECK(s30[i].arrival_time == doctest::Approx(2.0 * (i + 1)));
    CHECK_FALSE(s30[i].partial);
  }
  CHECK(SegmentStream(RandomWave(240000, rng), 30.0).size() == 1);
  const auto s5 = SegmentStream(RandomWave(40000, rng), 2.0);
  REQUIRE(s5.size() == 3);
  CHECK(s5[2].partial);
  CHECK(s5[2].audio.size() == 8000);
  CHECK_THROWS_AS(SegmentStream(RandomWave(100, rng), 0.0), Error);
}

TEST_CASE("two misplaced segments of thirty render as 6.6 percent") {
  std::mt19937_64 rng(2);
  const auto clean = CleanPair(30, rng);
  const SyncReport r = SyncError(clean, Delivery(clean, {4, 17}, 9.79), 1.0);
  CHECK(r.total == 30);
  CHECK(r.misplaced == 2);
  CHECK(r.error_rate == doctest::Approx(2.0 / 30.0));
  CHECK(r.ErrorPercent() == "6.6");
  CHECK(r.segments[4].misplaced);
  CHECK(r.segments[4].d1 == doctest::Approx(9.79));
  CHECK(r.ToJson().at("error_pct") == "6.6");
}

TEST_CASE("threshold is exclusive") {
  std::mt19937_64 rng(3);
  const auto clean = CleanPair(3, rng);
  const SyncReport at = SyncError(clean, Delivery(clean, {1}, 1.0), 1.0);
  CHECK(at.segments[1].d1 == 1.0);
  CHECK(at.misplaced == 0);
  const SyncReport above = SyncError(clean, Delivery(clean, {1}, std::nextafter(1.0, 2.0)), 1.0);
  CHECK(above.misplaced == 1);
  CHECK(SyncError(clean, clean, 1.0).error_rate == 0.0);
}

TEST_CASE("swapped channels and symmetry") {
  std::mt19937_64 rng(4);
  std::array<Waveform, 2> clean = {Harmonic(120, 80000), Harmonic(230, 80000)};
  const std::array<Waveform, 2> swapped = {clean[1], clean[0]};
  const SyncReport r = SyncError(clean, swapped, 2.0);
  CHECK(r.error_rate == 1.0);
  std::array<Waveform, 2> noisy = clean;
  noisy[0].samples[5] += 2.0;
  const SyncReport a = SyncError(clean, noisy, 1.0);
  const SyncReport b = SyncError({clean[1], clean[0]}, {noisy[1], noisy[0]}, 1.0);
  CHECK(a.misplaced == b.misplaced);
  for (std::size_t k = 0; k < a.segments.size(); ++k) CHECK(a.segments[k].d1 == b.segments[k].d2);
  CHECK_THROWS_AS(SyncError(clean, {clean[0], Waveform({0.0}, 8000)}, 1.0), Error);
}

TEST_CASE("partial segments are excluded from the denominator") {
  std::mt19937_64 rng(5);
  std::array<Waveform, 2> clean = {RandomWave(40000, rng), RandomWave(40000, rng)};
  std::array<Waveform, 2> bad = clean;
  for (std::size_t i = 32000; i < 40000; ++i) bad[0].samples[i] += 1.0;
  const SyncReport r = SyncError(clean, bad, 2.0);
  CHECK(r.segments.size() == 3);
  CHECK(r.segments[2].partial);
  CHECK(r.total == 2);
  CHECK(r.misplaced == 0);
}

TEST_CASE("bounded queue keeps FIFO order across threads") {
  BoundedQueue<int> q(3);
  std::vector<int> got;
  std::thread producer([&] {
    for (int i = 0; i < 500; ++i) REQUIRE(q.Push(i));
    q.Close();
  });
  while (auto v = q.Pop()) got.push_back(*v);
  producer.join();
  REQUIRE(got.size() == 500);
  for (int i = 0; i < 500; ++i) CHECK(got[static_cast<std::size_t>(i)] == i);
  CHECK_FALSE(q.Push(1));
  CHECK(q.capacity() == 3);
}

TEST_CASE("channel assignment") {
  const StubBackend backend(0);
  const Waveform low = Harmonic(110, 8000), high = Harmonic(240, 8000);
  ChannelState state = InitChannelState(low, high, backend);
  SeparatedSources out = AssignChannels(Pair(low, high), state, backend, 0);
  CHECK(state.assignment_log.back().permutation == std::array<int, 2>{0, 1});
  CHECK(out.estimates[0].samples == low.samples);
  out = AssignChannels(Pair(high, low), state, backend, 1);
  CHECK(state.assignment_log.back().permutation == std::array<int, 2>{1, 0});
  CHECK(out.estimates[0].samples == low.samples);

  // only the second speaker talks; it arrives on estimate 0
  Waveform quiet = low;
  for (Real &v : quiet.samples) v *= 0.01;
  AssignChannels(Pair(high, quiet), state, backend, 2);
  CHECK(state.assignment_log.back().single_speaker);
  CHECK(state.assignment_log.back().permutation == std::array<int, 2>{1, 0});

  // silence keeps the previous assignment
  const Waveform zero(std::vector<Real>(8000, 0.0), 8000);
  AssignChannels(Pair(zero, zero), state, backend, 3);
  CHECK(state.assignment_log.back().kept_previous);
  CHECK(state.assignment_log.back().permutation == std::array<int, 2>{1, 0});

  ChannelState empty;
  try {
    AssignChannels(Pair(low, high), empty, backend, 0);
    FAIL("uninitialised state accepted");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kMissingReference);
  }
  CHECK_THROWS_AS(InitChannelState(Harmonic(110, 7999), high, backend), Error);
}

TEST_CASE("reference clip selection skips leading silence") {
  // 2 s of tone after 2.5 s of silence: the mean energy per window is 0.4
  // of a full tone window, so the first window reaching half of that is
  // the one starting at 2.0 s, half covered by the tone.
  std::vector<Real> s(40000, 0.0);
  const Waveform tone = Harmonic(150, 16000);
  std::copy(tone.samples.begin(), tone.samples.end(), s.begin() + 20000);
  const Waveform clip = PickReferenceClip(Waveform(s, 8000));
  REQUIRE(clip.size() == 8000);
  CHECK(clip.samples == std::vector<Real>(s.begin() + 16000, s.begin() + 24000));
}

TEST_CASE("mixture gain matching") {
  const Waveform a = Harmonic(110, 4000), b = Harmonic(260, 4000);
  Waveform mix = a;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.samples[i] += b.samples[i];
  Waveform sa = a, sb = b;
  for (Real &v : sa.samples) v *= -0.2;
  for (Real &v : sb.samples) v *= 3.0;
  SeparatedSources est = Pair(sa, sb);
  MatchMixtureGain(est, mix);
  for (std::size_t i = 0; i < a.size(); i += 37) {
    CHECK(est.estimates[0].samples[i] == doctest::Approx(a.samples[i]).epsilon(1e-9));
    CHECK(est.estimates[1].samples[i] == doctest::Approx(b.samples[i]).epsilon(1e-9));
  }
}

TEST_CASE("threaded and virtual streaming agree") {
  Separator model(Small());
  model.InitRandom(3);
  SyntheticOptions o;
  o.seconds = 5.0;
  o.intermittent = true;
  const MixtureTriple t = SyntheticTriples(o, 1).front();
  const StubBackend backend(0);
  StreamConfig cfg;
  cfg.segment_len = 1.0;
  const StreamResult v = SimulateStream(model, t, backend, cfg);
  cfg.threaded = true;
  cfg.queue_capacity = 2;
  const StreamResult th = SimulateStream(model, t, backend, cfg);
  CHECK(v.delivered[0].samples == th.delivered[0].samples);
  CHECK(v.delivered[1].samples == th.delivered[1].samples);
  CHECK(v.report.misplaced == th.report.misplaced);
  REQUIRE(th.processed_order.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(th.processed_order[static_cast<std::size_t>(i)] == i);
  CHECK(v.delivered[0].size() == t.size());
  CHECK(v.state.assignment_log.size() == 5);
}

TEST_CASE("oracle separation keeps channels persistent") {
  // A separator that returns the clean sources is emulated by streaming the
  // sources through assignment directly.
  const StubBackend backend(0);
  SyntheticOptions o;
  o.seconds = 6.0;
  const MixtureTriple t = SyntheticTriples(o, 1).front();
  ChannelState state = InitChannelState(PickReferenceClip(t.source1), PickReferenceClip(t.source2), backend);
  for (int k = 0; k < 6; ++k) {
    const Waveform a = Slice(t.source1, k * 8000, 8000), b = Slice(t.source2, k * 8000, 8000);
    AssignChannels(k % 2 ? Pair(b, a) : Pair(a, b), state, backend, k);
    const auto expect = k % 2 ? std::array<int, 2>{1, 0} : std::array<int, 2>{0, 1};
    CHECK(state.assignment_log.back().permutation == expect);
  }
}

TEST_CASE("length sweep output") {
  TempDir dir("sweep");
  Separator model(Small());
  model.InitRandom(1);
  SyntheticOptions o;
  o.seconds = 4.0;
  const auto samples = SyntheticTriples(o, 2);
  const StubBackend backend(0);
  const std::vector<Real> lengths{1, 2, 4};
  const auto rows = LengthSweep(model, samples, lengths, backend);
  REQUIRE(rows.size() == 3);
  for (const auto &r : rows) {
    CHECK(r.n_samples == 2);
    CHECK(r.mean_error_pct >= 0.0);
    CHECK(r.mean_error_pct <= 100.0);
  }
  WriteLengthSweepCsv(dir / "s.csv", rows);
  WriteLengthSweepSvg(dir / "s.svg", rows);
  std::ifstream csv(dir / "s.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "segment_len_s,mean_error_pct,n_samples");
  CHECK(std::filesystem::file_size(dir / "s.svg") > 100);
  CHECK_THROWS_AS(LengthSweep(model, std::vector<MixtureTriple>{}, lengths, backend), Error);
}

TEST_CASE("Spearman correlation") {
  const std::vector<Real> x{1, 2, 3, 4, 5};
  CHECK(Spearman(x, std::vector<Real>{2, 4, 6, 8, 10}) == doctest::Approx(1.0));
  CHECK(Spearman(x, std::vector<Real>{5, 3, 2, 1, 0}) == doctest::Approx(-1.0));
  // ties take average ranks: ranks y = 1.5 1.5 3 4 5
  CHECK(Spearman(x, std::vector<Real>{1, 1, 2, 3, 4}) ==
        doctest::Approx(9.5 / std::sqrt(95.0)).epsilon(1e-12));
  CHECK(std::isnan(Spearman(x, std::vector<Real>(5, 0.0))));
}

}  // TEST_SUITE
