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

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tasnet/common.hpp"
#include "tasnet/corpus.hpp"
#include "tasnet/metrics.hpp"
#include "tasnet/model.hpp"

namespace tasnet {

enum class BackendKind { kExternalTransformer, kExternalTdnn, kStub };

std::string_view ToString(BackendKind kind);

struct EmbeddingVector {
  std::vector<Real> values;
  BackendKind backend = BackendKind::kStub;
  int layer = 0;

  std::size_t dimension() const { return values.size(); }
};

/// A frozen speaker-embedding network. Implementations never update their
/// own weights; EmbedBackward only propagates into the audio.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual BackendKind kind() const = 0;
  virtual int layer() const = 0;
  virtual std::string descriptor() const = 0;
  /// Shortest input (in samples at `sample_rate`) the backend accepts.
  virtual std::size_t MinimumSamples(int sample_rate) const = 0;

  /// Throws kBackendLength when the audio is shorter than MinimumSamples.
  virtual EmbeddingVector Embed(const Waveform &audio) const = 0;
  /// d(loss)/d(audio) given d(loss)/d(embedding).
  virtual std::vector<Real> EmbedBackward(const Waveform &audio,
                                          std::span<const Real> d_embedding) const = 0;

  /// Read-only view of the backend weights; empty for out-of-process
  /// backends.
  virtual std::span<const Real> FrozenWeights() const = 0;
};

/// Log-mel-energy statistics (per-band mean and standard deviation over
/// frames) followed by a fixed Gaussian projection to `dimension` values.
/// Deterministic from (seed, layer); differentiable end to end.
class StubBackend final : public EmbeddingBackend {
 public:
  static constexpr std::size_t kDimension = 64;
  static constexpr std::size_t kMelBands = 24;
  static constexpr Real kEnergyFloor = 1e-6;
  static constexpr Real kStdFloor = 1e-8;

  explicit StubBackend(std::uint64_t seed = 0, int layer = 0);

  BackendKind kind() const override { return BackendKind::kStub; }
  int layer() const override { return layer_; }
  std::string descriptor() const override;
  std::size_t MinimumSamples(int sample_rate) const override;
  EmbeddingVector Embed(const Waveform &audio) const override;
  std::vector<Real> EmbedBackward(const Waveform &audio,
                                  std::span<const Real> d_embedding) const override;
  std::span<const Real> FrozenWeights() const override { return projection_; }

  /// Statistics vector [means..., stds...] before projection.
  std::vector<Real> Statistics(const Waveform &audio) const;

 private:
  struct Frontend;
  const Frontend &FrontendFor(int sample_rate) const;

  std::uint64_t seed_;
  int layer_;
  std::vector<Real> projection_;  // [kDimension x 2*kMelBands]
  mutable std::mutex cache_mutex_;
  mutable std::vector<std::shared_ptr<const Frontend>> frontends_;
};

/// Embedding network hosted by an external process speaking the JSON-lines
/// protocol documented in docs/embedding_protocol.md. Audio is delivered at
/// 16 kHz; 8 kHz input is upsampled by an exact 2x polyphase interpolator
/// whose adjoint carries gradients back.
class ExternalBackend final : public EmbeddingBackend {
 public:
  ExternalBackend(BackendKind kind, int layer, std::string command);
  ~ExternalBackend() override;

  BackendKind kind() const override { return kind_; }
  int layer() const override { return layer_; }
  std::string descriptor() const override;
  std::size_t MinimumSamples(int sample_rate) const override;
  EmbeddingVector Embed(const Waveform &audio) const override;
  std::vector<Real> EmbedBackward(const Waveform &audio,
                                  std::span<const Real> d_embedding) const override;
  std::span<const Real> FrozenWeights() const override { return {}; }

 private:
  struct Process;
  std::vector<Real> ToModelRate(const Waveform &audio) const;

  BackendKind kind_;
  int layer_;
  std::string command_;
  std::size_t min_samples_16k_ = 400;
  mutable std::mutex mutex_;
  std::unique_ptr<Process> process_;
};

/// Descriptor grammar: "stub[:seed=S][,layer=L]", "transformer:layer=L"
/// (L in 1..12), "tdnn". External backends run `external_command`, or the
/// TASNET_EMBEDDER_CMD environment variable when that is empty; without
/// either they raise kBackendMissing.
std::unique_ptr<EmbeddingBackend> MakeBackend(std::string_view descriptor,
                                              const std::string &external_command = "");

/// x[n] -> y[2n] = x[n], y[2n+1] = windowed-sinc half-band interpolation.
std::vector<Real> Upsample2(std::span<const Real> x);
/// Adjoint of Upsample2.
std::vector<Real> Upsample2Adjoint(std::span<const Real> dy);

struct SimilarityConfig {
  Real weight_sl = 0.0;
  Real epsilon = 1e-8;        // guard in the cosine denominator
  Real clamp_epsilon = 1e-8;  // floor for the log argument
  std::string backend = "stub:seed=0";

  void Validate() const;
};

/// x1.x2 / max(|x1| |x2|, epsilon). Throws kDimension on mismatched sizes.
Real CosineSimilarity(const EmbeddingVector &x1, const EmbeddingVector &x2,
                      Real epsilon = 1e-8);
Real CosineSimilarity(std::span<const Real> x1, std::span<const Real> x2,
                      Real epsilon = 1e-8);
/// Gradients of CosineSimilarity with respect to both inputs.
void CosineSimilarityGrad(std::span<const Real> x1, std::span<const Real> x2,
                          Real epsilon, std::vector<Real> &d_x1,
                          std::vector<Real> &d_x2);

/// -weight * log(clamp((1 - css) / 2, clamp_epsilon, 1)).
Real SimilarityLoss(Real css, Real weight_sl, Real clamp_epsilon = 1e-8);
/// d SimilarityLoss / d css (zero where the clamp is active).
Real SimilarityLossGrad(Real css, Real weight_sl, Real clamp_epsilon = 1e-8);

struct CompositeLossResult {
  Real total = 0.0;
  PitResult pit;
  Real css = 0.0;         // between the two estimates; 0 when not computed
  Real similarity = 0.0;  // weighted penalty term
  bool css_computed = false;
};

/// pit_loss + SimilarityLoss(css(embed(est1), embed(est2))). The separation
/// term is negative SI-SNR, so minimising the sum raises SI-SNR and lowers
/// inter-estimate similarity. Embeddings are skipped when weight_sl == 0
/// unless `always_embed` is set. `backend` may be null only in that case.
CompositeLossResult CompositeLoss(const SeparatedSources &estimates,
                                  std::span<const Waveform> references,
                                  const SimilarityConfig &cfg,
                                  const EmbeddingBackend *backend,
                                  std::vector<std::vector<Real>> *d_estimates,
                                  bool always_embed = false);

struct SimilarityRow {
  std::string sample_id;
  Real css = 0.0;
};

/// CSS between the two clean sources of every triple in `split`.
std::vector<SimilarityRow> SimilarityReport(const SplitManifest &manifest,
                                            std::string_view split,
                                            const EmbeddingBackend &backend);
std::vector<SimilarityRow> SimilarityReport(std::span<const MixtureTriple> triples,
                                            const EmbeddingBackend &backend);
/// Columns: sample_id, css, backend, layer.
void WriteSimilarityCsv(const std::filesystem::path &path, std::span<const SimilarityRow> rows,
                        const EmbeddingBackend &backend);

}  // namespace tasnet
