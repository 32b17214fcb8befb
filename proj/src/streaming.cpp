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

#include "tasnet/streaming.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

namespace tasnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t SegmentSamples(Real segment_len, int rate) {
  if (!(segment_len > 0.0)) Throw(ErrorKind::kInvalidArgument, "segment length must be positive");
  const auto n = static_cast<std::size_t>(std::llround(segment_len * rate));
  if (n == 0) Throw(ErrorKind::kInvalidArgument, "segment shorter than one sample");
  return n;
}

Real Energy(std::span<const Real> x) {
  Real e = 0.0;
  for (Real v : x) e += v * v;
  return e;
}

}  // namespace

void MatchMixtureGain(SeparatedSources &estimates, const Waveform &mixture) {
  if (estimates.estimates.size() != 2) return;
  auto &a = estimates.estimates[0].samples;
  auto &b = estimates.estimates[1].samples;
  const auto &m = mixture.samples;
  if (a.size() != m.size() || b.size() != m.size()) {
    Throw(ErrorKind::kAlignment, "estimates and mixture differ in length");
  }
  const Real aa = Dot(a, a), bb = Dot(b, b), ab = Dot(a, b);
  const Real am = Dot(a, m), bm = Dot(b, m);
  const Real det = aa * bb - ab * ab;
  Real ga = 0.0, gb = 0.0;
  if (det > 1e-12 * aa * bb) {
    ga = (bb * am - ab * bm) / det;
    gb = (aa * bm - ab * am) / det;
  } else {
    ga = aa > 0.0 ? am / aa : 0.0;
    gb = bb > 0.0 ? bm / bb : 0.0;
  }
  for (Real &v : a) v *= ga;
  for (Real &v : b) v *= gb;
}

std::vector<StreamSegment> SegmentStream(const Waveform &mixture, Real segment_len) {
  const std::size_t seg = SegmentSamples(segment_len, mixture.sample_rate);
  std::vector<StreamSegment> out;
  for (std::size_t start = 0, k = 0; start < mixture.size(); start += seg, ++k) {
    StreamSegment s;
    s.index = static_cast<int>(k);
    const std::size_t len = std::min(seg, mixture.size() - start);
    s.audio = Slice(mixture, start, len);
    s.partial = len < seg;
    s.arrival_time = static_cast<Real>(start + len) / mixture.sample_rate;
    out.push_back(std::move(s));
  }
  return out;
}

ChannelState InitChannelState(const Waveform &reference1, const Waveform &reference2,
                              const EmbeddingBackend &backend) {
  for (const Waveform *r : {&reference1, &reference2}) {
    const auto expected = static_cast<std::size_t>(std::llround(kReferenceSeconds * r->sample_rate));
    if (r->size() != expected) {
      Throw(ErrorKind::kInvalidArgument, "reference clips must be exactly 1 s, got " +
                                             std::to_string(r->size()) + " samples");
    }
  }
  ChannelState state;
  state.references = std::array<EmbeddingVector, 2>{backend.Embed(reference1),
                                                   backend.Embed(reference2)};
  return state;
}

Waveform PickReferenceClip(const Waveform &source) {
  const auto win = static_cast<std::size_t>(std::llround(kReferenceSeconds * source.sample_rate));
  if (source.size() < win) {
    Throw(ErrorKind::kTooShort, "source shorter than a reference clip");
  }
  const Real mean_per_window = Energy(source.samples) * static_cast<Real>(win) /
                               static_cast<Real>(source.size());
  const std::size_t hop = win / 2;
  for (std::size_t start = 0; start + win <= source.size(); start += hop) {
    const Real e = Energy({source.samples.data() + start, win});
    if (e >= 0.5 * mean_per_window && e > 0.0) return Slice(source, start, win);
  }
  return Slice(source, 0, win);
}

SeparatedSources AssignChannels(const SeparatedSources &estimates, ChannelState &state,
                                const EmbeddingBackend &backend, int segment_index) {
  if (!state.initialized()) {
    Throw(ErrorKind::kMissingReference, "channel state has no reference embeddings");
  }
  if (estimates.estimates.size() != 2) {
    Throw(ErrorKind::kShape, "channel assignment expects two estimates");
  }
  const auto &refs = *state.references;
  AssignmentEntry entry;
  entry.segment = segment_index;
  entry.permutation = state.last;

  const Waveform &a = estimates.estimates[0];
  const Waveform &b = estimates.estimates[1];
  const Real ea = Energy(a.samples), eb = Energy(b.samples);
  const Real louder = std::max(ea, eb), quieter = std::min(ea, eb);
  if (a.size() < backend.MinimumSamples(a.sample_rate) || louder <= 0.0) {
    entry.kept_previous = true;
  } else if (quieter < kSingleSpeakerEnergyRatio * louder) {
    entry.single_speaker = true;
    const int active = ea >= eb ? 0 : 1;
    const Real s0 = CosineSimilarity(backend.Embed(estimates.estimates[active]), refs[0]);
    const Real s1 = CosineSimilarity(backend.Embed(estimates.estimates[active]), refs[1]);
    // identity puts estimate 0 on channel 0
    entry.identity_score = active == 0 ? s0 : s1;
    entry.swap_score = active == 0 ? s1 : s0;
  } else {
    const EmbeddingVector va = backend.Embed(a);
    const EmbeddingVector vb = backend.Embed(b);
    entry.identity_score = CosineSimilarity(va, refs[0]) + CosineSimilarity(vb, refs[1]);
    entry.swap_score = CosineSimilarity(vb, refs[0]) + CosineSimilarity(va, refs[1]);
  }
  if (!entry.kept_previous) {
    if (std::abs(entry.identity_score - entry.swap_score) < kAssignmentTie) {
      entry.kept_previous = true;
    } else {
      entry.permutation = entry.identity_score > entry.swap_score ? std::array<int, 2>{0, 1}
                                                                  : std::array<int, 2>{1, 0};
    }
  }
  state.last = entry.permutation;
  state.assignment_log.push_back(entry);
  SeparatedSources out;
  out.estimates = {estimates.estimates[static_cast<std::size_t>(entry.permutation[0])],
                   estimates.estimates[static_cast<std::size_t>(entry.permutation[1])]};
  return out;
}

std::string SyncReport::ErrorPercent() const {
  if (total == 0) return "0.0";
  const std::size_t tenths = misplaced * 1000 / total;
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

json SyncReport::ToJson() const {
  json segs = json::array();
  for (const SegmentSync &s : segments) {
    segs.push_back({{"index", s.index}, {"d1", s.d1}, {"d2", s.d2},
                    {"misplaced", s.misplaced}, {"partial", s.partial}});
  }
  return {{"segment_len", segment_len}, {"threshold", threshold},
          {"misplaced", misplaced},     {"total", total},
          {"error_rate", error_rate},   {"error_pct", ErrorPercent()},
          {"segments", segs}};
}

SyncReport SyncError(const std::array<Waveform, 2> &clean, const std::array<Waveform, 2> &delivered,
                     Real segment_len, Real threshold) {
  const std::size_t n = clean[0].size();
  if (clean[1].size() != n || delivered[0].size() != n || delivered[1].size() != n) {
    Throw(ErrorKind::kAlignment, "clean and delivered channels differ in length");
  }
  const std::size_t seg = SegmentSamples(segment_len, clean[0].sample_rate);
  SyncReport r;
  r.segment_len = segment_len;
  r.threshold = threshold;
  for (std::size_t start = 0, k = 0; start < n; start += seg, ++k) {
    const std::size_t len = std::min(seg, n - start);
    SegmentSync s;
    s.index = static_cast<int>(k);
    s.partial = len < seg;
    Real e1 = 0.0, e2 = 0.0;
    for (std::size_t i = start; i < start + len; ++i) {
      const Real x = clean[0].samples[i] - delivered[0].samples[i];
      const Real y = clean[1].samples[i] - delivered[1].samples[i];
      e1 += x * x;
      e2 += y * y;
    }
    s.d1 = std::sqrt(e1);
    s.d2 = std::sqrt(e2);
    s.misplaced = s.d1 > threshold || s.d2 > threshold;
    if (!s.partial) {
      ++r.total;
      if (s.misplaced) ++r.misplaced;
    }
    r.segments.push_back(s);
  }
  r.error_rate = r.total == 0 ? 0.0 : static_cast<Real>(r.misplaced) / static_cast<Real>(r.total);
  return r;
}

StreamResult SimulateStream(const Separator &model, const MixtureTriple &triple,
                            const EmbeddingBackend &backend, const StreamConfig &cfg) {
  StreamResult res;
  res.state = InitChannelState(PickReferenceClip(triple.source1),
                               PickReferenceClip(triple.source2), backend);
  const int rate = triple.mixture.sample_rate;
  res.delivered = {Waveform{{}, rate}, Waveform{{}, rate}};
  const std::size_t min_len = static_cast<std::size_t>(model.config().kernel_len);

  const auto consume = [&](const StreamSegment &seg) {
    const auto t0 = std::chrono::steady_clock::now();
    SeparatedSources est;
    if (seg.audio.size() >= min_len) {
      est = model.Forward(seg.audio);
      if (cfg.match_gain) MatchMixtureGain(est, seg.audio);
    } else {
      est.estimates.assign(2, Waveform{std::vector<Real>(seg.audio.size(), 0.0), rate});
    }
    const SeparatedSources ordered = AssignChannels(est, res.state, backend, seg.index);
    for (std::size_t c = 0; c < 2; ++c) {
      auto &dst = res.delivered[c].samples;
      const auto &src = ordered.estimates[c].samples;
      dst.insert(dst.end(), src.begin(), src.end());
    }
    const Real took = std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
    res.processing_seconds.push_back(took);
    if (took > static_cast<Real>(seg.audio.size()) / rate) ++res.over_budget;
    res.processed_order.push_back(seg.index);
  };

  std::vector<StreamSegment> segments = SegmentStream(triple.mixture, cfg.segment_len);
  if (!cfg.threaded) {
    for (const StreamSegment &s : segments) consume(s);
  } else {
    BoundedQueue<StreamSegment> queue(cfg.queue_capacity);
    std::thread producer([&] {
      for (StreamSegment &s : segments) {
        if (!queue.Push(std::move(s))) break;
      }
      queue.Close();
    });
    try {
      while (auto s = queue.Pop()) consume(*s);
    } catch (...) {
      queue.Close();
      producer.join();
      throw;
    }
    producer.join();
  }
  res.report = SyncError({triple.source1, triple.source2}, res.delivered, cfg.segment_len,
                         cfg.threshold);
  return res;
}

std::vector<LengthSweepRow> LengthSweep(const Separator &model,
                                        std::span<const MixtureTriple> samples,
                                        std::span<const Real> lengths,
                                        const EmbeddingBackend &backend,
                                        const StreamConfig &base) {
  if (samples.empty()) Throw(ErrorKind::kEmptySplit, "length sweep needs samples");
  std::vector<LengthSweepRow> rows;
  for (Real len : lengths) {
    StreamConfig cfg = base;
    cfg.segment_len = len;
    Real sum = 0.0;
    for (const MixtureTriple &t : samples) {
      sum += SimulateStream(model, t, backend, cfg).report.error_rate;
    }
    rows.push_back({len, 100.0 * sum / static_cast<Real>(samples.size()), samples.size()});
  }
  return rows;
}

void WriteLengthSweepCsv(const fs::path &path, std::span<const LengthSweepRow> rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "segment_len_s,mean_error_pct,n_samples\n";
  char buf[96];
  for (const LengthSweepRow &r : rows) {
    std::snprintf(buf, sizeof(buf), "%g,%.4f,%zu", r.segment_len_s, r.mean_error_pct, r.n_samples);
    out << buf << '\n';
  }
  if (!out) Throw(ErrorKind::kIo, "cannot write " + path.string());
}

void WriteLengthSweepSvg(const fs::path &path, std::span<const LengthSweepRow> rows) {
  constexpr Real kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;
  Real x_max = 1.0, y_max = 1.0;
  for (const LengthSweepRow &r : rows) {
    x_max = std::max(x_max, r.segment_len_s);
    y_max = std::max(y_max, r.mean_error_pct);
  }
  y_max = std::ceil(y_max / 5.0) * 5.0;
  const auto px = [&](Real x) { return kLeft + (kW - kLeft - kRight) * x / x_max; };
  const auto py = [&](Real y) { return kH - kBottom - (kH - kTop - kBottom) * y / y_max; };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                kW, kH);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"18\" text-anchor=\"middle\">Average synchronization error vs. "
                "segment length</text>\n",
                kW / 2);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                kLeft, py(0), px(x_max), py(0), kLeft, py(0), kLeft, py(y_max));
  svg += buf;
  for (int i = 0; i <= 5; ++i) {
    const Real y = y_max * i / 5.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%g</text>\n", kLeft - 6, py(y) + 4, y);
    svg += buf;
  }
  for (const LengthSweepRow &r : rows) {
    std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%g</text>\n",
                  px(r.segment_len_s), py(0) + 16, r.segment_len_s);
    svg += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">segment length (s)</text>\n"
                "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" transform=\"rotate(-90 16 %g)\">"
                "error (%%)</text>\n",
                (kLeft + kW - kRight) / 2, kH - 10, kH / 2, kH / 2);
  svg += buf;
  std::string points;
  for (const LengthSweepRow &r : rows) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(r.segment_len_s), py(r.mean_error_pct));
    points += buf;
  }
  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
  for (const LengthSweepRow &r : rows) {
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#1f77b4\"/>\n",
                  px(r.segment_len_s), py(r.mean_error_pct));
    svg += buf;
  }
  svg += "</svg>\n";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << svg;
  if (!out) Throw(ErrorKind::kIo, "cannot write " + path.string());
}

namespace {

std::vector<Real> Ranks(std::span<const Real> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<Real> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const Real avg = 0.5 * static_cast<Real>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

Real Spearman(std::span<const Real> x, std::span<const Real> y) {
  if (x.size() != y.size() || x.size() < 2) {
    Throw(ErrorKind::kInvalidArgument, "Spearman needs two equal-length series of length >= 2");
  }
  const std::vector<Real> rx = Ranks(x), ry = Ranks(y);
  const Real n = static_cast<Real>(x.size());
  const Real mean = (n + 1.0) / 2.0;
  Real sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<Real>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace tasnet
