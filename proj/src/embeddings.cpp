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

#include "tasnet/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "tasnet/tensor.hpp"

namespace tasnet {

std::string_view ToString(BackendKind kind) {
  switch (kind) {
    case BackendKind::kExternalTransformer: return "transformer";
    case BackendKind::kExternalTdnn: return "tdnn";
    case BackendKind::kStub: return "stub";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Stub backend

struct StubBackend::Frontend {
  int sample_rate = 0;
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  std::size_t bins = 0;
  Matrix cosine;   // [bins x frame_len], window folded in
  Matrix sine;     // [bins x frame_len]
  Matrix mel;      // [kMelBands x bins]

  std::size_t NumFrames(std::size_t length) const {
    return (length - frame_len) / hop + 1;
  }
};

namespace {

Real HzToMel(Real hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
Real MelToHz(Real mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// [frame_len x frames], column k = x[k*hop, k*hop + frame_len)
Matrix FrameSignal(std::span<const Real> x, std::size_t frame_len, std::size_t hop,
                   std::size_t frames) {
  Matrix out(frame_len, frames);
  for (std::size_t n = 0; n < frame_len; ++n) {
    Real *row = out.row(n);
    for (std::size_t k = 0; k < frames; ++k) row[k] = x[k * hop + n];
  }
  return out;
}

struct StubForward {
  Matrix framed, re, im, power, mel, logmel;
  std::vector<Real> mean, stddev;
};

}  // namespace

StubBackend::StubBackend(std::uint64_t seed, int layer) : seed_(seed), layer_(layer) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(layer)};
  std::mt19937_64 rng(seq);
  const std::size_t in = 2 * kMelBands;
  std::normal_distribution<Real> dist(0.0, 1.0 / std::sqrt(static_cast<Real>(in)));
  projection_.resize(kDimension * in);
  for (Real &v : projection_) v = dist(rng);
}

std::string StubBackend::descriptor() const {
  return "stub:seed=" + std::to_string(seed_) + ",layer=" + std::to_string(layer_);
}

const StubBackend::Frontend &StubBackend::FrontendFor(int sample_rate) const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  for (const auto &f : frontends_) {
    if (f->sample_rate == sample_rate) return *f;
  }
  auto f = std::make_shared<Frontend>();
  f->sample_rate = sample_rate;
  f->frame_len = static_cast<std::size_t>(std::lround(0.025 * sample_rate));
  f->hop = static_cast<std::size_t>(std::lround(0.010 * sample_rate));
  std::size_t fft = 1;
  while (fft < f->frame_len) fft <<= 1;
  f->bins = fft / 2 + 1;
  f->cosine = Matrix(f->bins, f->frame_len);
  f->sine = Matrix(f->bins, f->frame_len);
  const Real two_pi = 2.0 * std::numbers::pi;
  for (std::size_t n = 0; n < f->frame_len; ++n) {
    const Real w = 0.5 - 0.5 * std::cos(two_pi * static_cast<Real>(n) /
                                        static_cast<Real>(f->frame_len));
    for (std::size_t k = 0; k < f->bins; ++k) {
      const Real ang = two_pi * static_cast<Real>(k * n % fft) / static_cast<Real>(fft);
      f->cosine(k, n) = w * std::cos(ang);
      f->sine(k, n) = -w * std::sin(ang);
    }
  }
  f->mel = Matrix(kMelBands, f->bins);
  const Real mel_hi = HzToMel(sample_rate / 2.0);
  std::vector<Real> edges(kMelBands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = MelToHz(mel_hi * static_cast<Real>(i) / static_cast<Real>(kMelBands + 1));
  }
  for (std::size_t m = 0; m < kMelBands; ++m) {
    for (std::size_t k = 0; k < f->bins; ++k) {
      const Real hz = static_cast<Real>(k) * sample_rate / static_cast<Real>(fft);
      Real v = 0.0;
      if (hz > edges[m] && hz <= edges[m + 1]) {
        v = (hz - edges[m]) / (edges[m + 1] - edges[m]);
      } else if (hz > edges[m + 1] && hz < edges[m + 2]) {
        v = (edges[m + 2] - hz) / (edges[m + 2] - edges[m + 1]);
      }
      f->mel(m, k) = v;
    }
  }
  frontends_.push_back(f);
  return *frontends_.back();
}

std::size_t StubBackend::MinimumSamples(int sample_rate) const {
  return FrontendFor(sample_rate).frame_len;
}

namespace {

StubForward RunStub(const Waveform &audio, const Matrix &cosine, const Matrix &sine,
                    const Matrix &mel, std::size_t frame_len, std::size_t hop) {
  const std::size_t frames = (audio.size() - frame_len) / hop + 1;
  const std::size_t bins = cosine.rows();
  const std::size_t bands = mel.rows();
  StubForward s;
  s.framed = FrameSignal(audio.samples, frame_len, hop, frames);
  s.re = Matrix(bins, frames);
  s.im = Matrix(bins, frames);
  GemmNN(s.re, View(cosine), View(s.framed));
  GemmNN(s.im, View(sine), View(s.framed));
  s.power = Matrix(bins, frames);
  for (std::size_t i = 0; i < s.power.size(); ++i) {
    s.power.data()[i] = s.re.data()[i] * s.re.data()[i] + s.im.data()[i] * s.im.data()[i];
  }
  s.mel = Matrix(bands, frames);
  GemmNN(s.mel, View(mel), View(s.power));
  s.logmel = Matrix(bands, frames);
  s.mean.assign(bands, 0.0);
  s.stddev.assign(bands, 0.0);
  const Real inv_frames = 1.0 / static_cast<Real>(frames);
  for (std::size_t m = 0; m < bands; ++m) {
    Real *z = s.logmel.row(m);
    const Real *e = s.mel.row(m);
    Real mean = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      z[t] = std::log(e[t] + StubBackend::kEnergyFloor);
      mean += z[t];
    }
    mean *= inv_frames;
    Real var = 0.0;
    for (std::size_t t = 0; t < frames; ++t) var += (z[t] - mean) * (z[t] - mean);
    var *= inv_frames;
    s.mean[m] = mean;
    s.stddev[m] = std::sqrt(var + StubBackend::kStdFloor);
  }
  return s;
}

}  // namespace

std::vector<Real> StubBackend::Statistics(const Waveform &audio) const {
  const Frontend &f = FrontendFor(audio.sample_rate);
  if (audio.size() < f.frame_len) {
    Throw(ErrorKind::kBackendLength, "stub embedding needs at least " +
                                         std::to_string(f.frame_len) + " samples, got " +
                                         std::to_string(audio.size()));
  }
  StubForward s = RunStub(audio, f.cosine, f.sine, f.mel, f.frame_len, f.hop);
  std::vector<Real> stats = s.mean;
  stats.insert(stats.end(), s.stddev.begin(), s.stddev.end());
  return stats;
}

EmbeddingVector StubBackend::Embed(const Waveform &audio) const {
  const std::vector<Real> stats = Statistics(audio);
  EmbeddingVector out;
  out.backend = BackendKind::kStub;
  out.layer = layer_;
  out.values.assign(kDimension, 0.0);
  for (std::size_t d = 0; d < kDimension; ++d) {
    out.values[d] = Dot({projection_.data() + d * stats.size(), stats.size()}, stats);
  }
  return out;
}

std::vector<Real> StubBackend::EmbedBackward(const Waveform &audio,
                                             std::span<const Real> d_embedding) const {
  if (d_embedding.size() != kDimension) {
    Throw(ErrorKind::kDimension, "embedding gradient has the wrong dimension");
  }
  const Frontend &f = FrontendFor(audio.sample_rate);
  if (audio.size() < f.frame_len) {
    Throw(ErrorKind::kBackendLength, "stub embedding input too short");
  }
  const StubForward s = RunStub(audio, f.cosine, f.sine, f.mel, f.frame_len, f.hop);
  const std::size_t bands = kMelBands;
  const std::size_t frames = s.logmel.cols();
  const Real inv_frames = 1.0 / static_cast<Real>(frames);

  // d stats = projection^T d_embedding
  std::vector<Real> d_stats(2 * bands, 0.0);
  for (std::size_t d = 0; d < kDimension; ++d) {
    const Real *w = projection_.data() + d * 2 * bands;
    for (std::size_t j = 0; j < 2 * bands; ++j) d_stats[j] += w[j] * d_embedding[d];
  }

  // Statistics -> log-mel -> mel energies.
  Matrix d_mel(bands, frames);
  for (std::size_t m = 0; m < bands; ++m) {
    const Real d_mean = d_stats[m];
    const Real d_std = d_stats[bands + m];
    const Real *z = s.logmel.row(m);
    const Real *e = s.mel.row(m);
    Real *out = d_mel.row(m);
    for (std::size_t t = 0; t < frames; ++t) {
      const Real d_z = d_mean * inv_frames +
                       d_std * (z[t] - s.mean[m]) * inv_frames / s.stddev[m];
      out[t] = d_z / (e[t] + kEnergyFloor);
    }
  }
  Matrix d_power(f.bins, frames);
  GemmTN(d_power, View(f.mel), View(d_mel));
  Matrix d_re(f.bins, frames), d_im(f.bins, frames);
  for (std::size_t i = 0; i < d_power.size(); ++i) {
    d_re.data()[i] = 2.0 * s.re.data()[i] * d_power.data()[i];
    d_im.data()[i] = 2.0 * s.im.data()[i] * d_power.data()[i];
  }
  Matrix d_framed(f.frame_len, frames);
  GemmTN(d_framed, View(f.cosine), View(d_re));
  GemmTN(d_framed, View(f.sine), View(d_im));

  std::vector<Real> d_audio(audio.size(), 0.0);
  for (std::size_t n = 0; n < f.frame_len; ++n) {
    const Real *row = d_framed.row(n);
    for (std::size_t k = 0; k < frames; ++k) d_audio[k * f.hop + n] += row[k];
  }
  return d_audio;
}

// ---------------------------------------------------------------------------
// 2x polyphase interpolation

namespace {

constexpr int kHalfTaps = 16;

const std::vector<Real> &HalfBandTaps() {
  // Odd outputs sit halfway between x[n] and x[n+1]: taps for offsets
  // j = -kHalfTaps+1 .. kHalfTaps, sampling sinc at (j - 0.5).
  static const std::vector<Real> taps = [] {
    std::vector<Real> h(2 * kHalfTaps);
    Real sum = 0.0;
    for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
      const Real u = static_cast<Real>(j) - 0.5;
      const Real sinc = std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
      const Real a = std::numbers::pi * u / kHalfTaps;
      const Real window = 0.42 + 0.5 * std::cos(a) + 0.08 * std::cos(2.0 * a);
      h[static_cast<std::size_t>(j + kHalfTaps - 1)] = sinc * window;
      sum += sinc * window;
    }
    for (Real &v : h) v /= sum;
    return h;
  }();
  return taps;
}

}  // namespace

std::vector<Real> Upsample2(std::span<const Real> x) {
  const auto &h = HalfBandTaps();
  const long n = static_cast<long>(x.size());
  std::vector<Real> y(2 * x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(2 * i)] = x[static_cast<std::size_t>(i)];
    Real acc = 0.0;
    for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
      const long src = i + j;
      if (src >= 0 && src < n) {
        acc += h[static_cast<std::size_t>(j + kHalfTaps - 1)] * x[static_cast<std::size_t>(src)];
      }
    }
    y[static_cast<std::size_t>(2 * i + 1)] = acc;
  }
  return y;
}

std::vector<Real> Upsample2Adjoint(std::span<const Real> dy) {
  if (dy.size() % 2 != 0) Throw(ErrorKind::kShape, "upsampled gradient must have even length");
  const auto &h = HalfBandTaps();
  const long n = static_cast<long>(dy.size() / 2);
  std::vector<Real> dx(static_cast<std::size_t>(n), 0.0);
  for (long i = 0; i < n; ++i) {
    dx[static_cast<std::size_t>(i)] += dy[static_cast<std::size_t>(2 * i)];
    const Real g = dy[static_cast<std::size_t>(2 * i + 1)];
    for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
      const long src = i + j;
      if (src >= 0 && src < n) {
        dx[static_cast<std::size_t>(src)] += h[static_cast<std::size_t>(j + kHalfTaps - 1)] * g;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Descriptors

namespace {

std::vector<std::pair<std::string, std::string>> ParseOptions(std::string_view body) {
  std::vector<std::pair<std::string, std::string>> out;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const std::string_view item = body.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      Throw(ErrorKind::kInvalidArgument, "backend option without '=': " + std::string(item));
    }
    out.emplace_back(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return out;
}

long ParseLong(const std::string &s, const std::string &what) {
  char *end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end == nullptr || *end != '\0') {
    Throw(ErrorKind::kInvalidArgument, "bad integer for " + what + ": " + s);
  }
  return v;
}

}  // namespace

std::unique_ptr<EmbeddingBackend> MakeBackend(std::string_view descriptor,
                                              const std::string &external_command) {
  const auto colon = descriptor.find(':');
  const std::string_view name = descriptor.substr(0, colon);
  const auto options = colon == std::string_view::npos
                           ? std::vector<std::pair<std::string, std::string>>{}
                           : ParseOptions(descriptor.substr(colon + 1));
  long seed = 0, layer = -1;
  for (const auto &[key, value] : options) {
    if (key == "seed") {
      seed = ParseLong(value, key);
    } else if (key == "layer") {
      layer = ParseLong(value, key);
    } else {
      Throw(ErrorKind::kInvalidArgument, "unknown backend option: " + key);
    }
  }
  if (name == "stub") {
    return std::make_unique<StubBackend>(static_cast<std::uint64_t>(seed),
                                         static_cast<int>(std::max(layer, 0L)));
  }
  BackendKind kind;
  if (name == "transformer") {
    kind = BackendKind::kExternalTransformer;
    if (layer < 1 || layer > 12) {
      Throw(ErrorKind::kInvalidArgument, "transformer layer must be in [1, 12]");
    }
  } else if (name == "tdnn") {
    kind = BackendKind::kExternalTdnn;
    layer = 0;
  } else {
    Throw(ErrorKind::kInvalidArgument, "unknown embedding backend: " + std::string(name));
  }
  std::string command = external_command;
  if (command.empty()) {
    if (const char *env = std::getenv("TASNET_EMBEDDER_CMD")) command = env;
  }
  if (command.empty()) {
    Throw(ErrorKind::kBackendMissing,
          std::string(name) + " backend needs an embedder command (TASNET_EMBEDDER_CMD)");
  }
  return std::make_unique<ExternalBackend>(kind, static_cast<int>(layer), command);
}

// ---------------------------------------------------------------------------
// Similarity

void SimilarityConfig::Validate() const {
  if (!(weight_sl >= 0.0)) Throw(ErrorKind::kInvalidArgument, "weight_sl must be >= 0");
  if (!(epsilon > 0.0) || !(clamp_epsilon > 0.0)) {
    Throw(ErrorKind::kInvalidArgument, "similarity epsilons must be > 0");
  }
}

Real CosineSimilarity(std::span<const Real> x1, std::span<const Real> x2, Real epsilon) {
  if (x1.size() != x2.size()) {
    Throw(ErrorKind::kDimension, "embedding dimensions differ: " + std::to_string(x1.size()) +
                                     " vs " + std::to_string(x2.size()));
  }
  Real dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    dot += x1[i] * x2[i];
    n1 += x1[i] * x1[i];
    n2 += x2[i] * x2[i];
  }
  return dot / std::max(std::sqrt(n1) * std::sqrt(n2), epsilon);
}

Real CosineSimilarity(const EmbeddingVector &x1, const EmbeddingVector &x2, Real epsilon) {
  return CosineSimilarity(x1.values, x2.values, epsilon);
}

void CosineSimilarityGrad(std::span<const Real> x1, std::span<const Real> x2, Real epsilon,
                          std::vector<Real> &d_x1, std::vector<Real> &d_x2) {
  if (x1.size() != x2.size()) Throw(ErrorKind::kDimension, "embedding dimensions differ");
  Real dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    dot += x1[i] * x2[i];
    n1 += x1[i] * x1[i];
    n2 += x2[i] * x2[i];
  }
  const Real a = std::sqrt(n1), b = std::sqrt(n2);
  d_x1.assign(x1.size(), 0.0);
  d_x2.assign(x2.size(), 0.0);
  if (a * b > epsilon) {
    const Real denom = a * b;
    const Real css = dot / denom;
    for (std::size_t i = 0; i < x1.size(); ++i) {
      d_x1[i] = x2[i] / denom - css * x1[i] / n1;
      d_x2[i] = x1[i] / denom - css * x2[i] / n2;
    }
  } else {
    for (std::size_t i = 0; i < x1.size(); ++i) {
      d_x1[i] = x2[i] / epsilon;
      d_x2[i] = x1[i] / epsilon;
    }
  }
}

Real SimilarityLoss(Real css, Real weight_sl, Real clamp_epsilon) {
  const Real arg = std::clamp((1.0 - css) / 2.0, clamp_epsilon, Real{1});
  return -weight_sl * std::log(arg);
}

Real SimilarityLossGrad(Real css, Real weight_sl, Real clamp_epsilon) {
  const Real arg = (1.0 - css) / 2.0;
  if (arg <= clamp_epsilon || arg >= 1.0) return 0.0;
  // d/dcss [-w log((1 - css)/2)] = w / (1 - css)
  return weight_sl / (1.0 - css);
}

CompositeLossResult CompositeLoss(const SeparatedSources &estimates,
                                  std::span<const Waveform> references,
                                  const SimilarityConfig &cfg, const EmbeddingBackend *backend,
                                  std::vector<std::vector<Real>> *d_estimates,
                                  bool always_embed) {
  cfg.Validate();
  CompositeLossResult out;
  out.pit = d_estimates ? PitLossWithGrad(estimates, references, *d_estimates)
                        : PitLoss(estimates, references);
  out.total = out.pit.loss;
  if (cfg.weight_sl == 0.0 && !always_embed) return out;
  if (backend == nullptr) {
    Throw(ErrorKind::kBackendMissing, "similarity term requested without an embedding backend");
  }
  if (estimates.estimates.size() != 2) {
    Throw(ErrorKind::kShape, "the similarity term is defined for two estimates");
  }
  const Waveform &a = estimates.estimates[0];
  const Waveform &b = estimates.estimates[1];
  const EmbeddingVector ea = backend->Embed(a);
  const EmbeddingVector eb = backend->Embed(b);
  out.css = CosineSimilarity(ea, eb, cfg.epsilon);
  out.css_computed = true;
  out.similarity = SimilarityLoss(out.css, cfg.weight_sl, cfg.clamp_epsilon);
  out.total = out.pit.loss + out.similarity;

  if (d_estimates != nullptr) {
    const Real d_css = SimilarityLossGrad(out.css, cfg.weight_sl, cfg.clamp_epsilon);
    if (d_css != 0.0) {
      std::vector<Real> d_ea, d_eb;
      CosineSimilarityGrad(ea.values, eb.values, cfg.epsilon, d_ea, d_eb);
      for (Real &v : d_ea) v *= d_css;
      for (Real &v : d_eb) v *= d_css;
      const std::vector<Real> ga = backend->EmbedBackward(a, d_ea);
      const std::vector<Real> gb = backend->EmbedBackward(b, d_eb);
      Axpy((*d_estimates)[0], 1.0, ga);
      Axpy((*d_estimates)[1], 1.0, gb);
    }
  }
  return out;
}

}  // namespace tasnet
