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

// Conv-TasNet separator: a learned 1-D convolutional encoder, a temporal
// convolutional network (TCN) that predicts one multiplicative mask per
// source, and a transposed-convolution decoder.
//
// Data layout: every feature map is a Matrix of [channels x frames].

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tasnet/common.hpp"
#include "tasnet/tensor.hpp"

namespace tasnet {

enum class MaskNonlinearity { kSigmoid, kSoftmax };
enum class NormKind { kGlobal, kCumulative };

std::string_view ToString(MaskNonlinearity m);
std::string_view ToString(NormKind n);
MaskNonlinearity ParseMaskNonlinearity(std::string_view s);
NormKind ParseNormKind(std::string_view s);

struct SeparatorConfig {
  int num_filters = 512;        // N, encoder basis size
  int kernel_len = 16;          // L, samples per encoder frame
  int bottleneck = 128;         // B
  int conv_channels = 512;      // H
  int kernel = 3;               // P, depthwise kernel size
  int blocks_per_repeat = 8;    // X, dilations 1, 2, ..., 2^(X-1)
  int repeats = 3;              // R
  int num_sources = 2;          // C
  MaskNonlinearity mask = MaskNonlinearity::kSigmoid;
  NormKind norm = NormKind::kGlobal;

  /// N=512 L=16 B=128 H=512 P=3 X=8 R=3, gLN, sigmoid masks.
  static SeparatorConfig Full();
  /// Desk-scale preset: N=64 L=16 B=32 H=64 P=3 X=4 R=1.
  static SeparatorConfig Toy();

  int stride() const { return kernel_len / 2; }
  int num_blocks() const { return blocks_per_repeat * repeats; }
  int Dilation(int block) const { return 1 << (block % blocks_per_repeat); }

  /// Frames of encoder output that can influence one mask frame:
  /// 1 + sum over blocks of (P - 1) * dilation.
  long ReceptiveFieldFrames() const;
  /// The same extent in input samples and seconds.
  long ReceptiveFieldSamples() const;
  double ReceptiveFieldSeconds(int sample_rate) const;

  /// Frame count for an input of `length` samples (no padding).
  std::size_t NumFrames(std::size_t length) const;

  void Validate() const;
  bool operator==(const SeparatorConfig &) const = default;
};

struct SeparatedSources {
  std::vector<Waveform> estimates;
};

struct ForwardTrace;

/// Owns the configuration and every learnable tensor.
class Separator {
 public:
  explicit Separator(SeparatorConfig cfg);

  const SeparatorConfig &config() const { return cfg_; }
  ParamStore &params() { return params_; }
  const ParamStore &params() const { return params_; }
  std::size_t NumParameters() const { return params_.total_size(); }

  /// Deterministic given the seed: uniform(+-1/sqrt(fan_in)) for the 1x1 and
  /// depthwise convolutions, Xavier-normal for the bases, PReLU slopes 0.25,
  /// norm gains 1 and offsets 0.
  void InitRandom(std::uint64_t seed);

  /// ReLU(basis * frames) -> [N x frames].
  Matrix Encode(const Waveform &mixture) const;
  /// One [N x frames] mask per source.
  std::vector<Matrix> EstimateMasks(const Matrix &features) const;
  /// Overlap-add each masked feature map back to `output_length` samples.
  SeparatedSources Decode(std::span<const Matrix> masked,
                          std::size_t output_length, int sample_rate) const;
  SeparatedSources Forward(const Waveform &mixture) const;

  /// Forward pass that keeps every intermediate needed by Backward.
  ForwardTrace ForwardWithTrace(const Waveform &mixture) const;
  /// Accumulates d(loss)/d(params) into `grad` (same layout as params()).
  void Backward(const ForwardTrace &trace,
                std::span<const std::vector<Real>> d_estimates,
                std::span<Real> grad) const;

  /// Receptive field measured by pushing an impulse through the TCN with the
  /// normalisation layers bypassed (gLN/cLN statistics are non-local by
  /// construction). Returns the number of frames whose output changes.
  long MeasureReceptiveFieldFrames(std::size_t probe_frames) const;

 private:
  struct BlockSlots {
    std::size_t in_w, in_b, prelu1, norm1_g, norm1_b, dw_w, dw_b, prelu2,
        norm2_g, norm2_b, res_w, res_b, skip_w, skip_b;
  };

  Matrix RunTcn(const Matrix &features, ForwardTrace *trace,
                bool bypass_norm) const;

  SeparatorConfig cfg_;
  ParamStore params_;
  std::size_t enc_basis_, dec_basis_, in_norm_g_, in_norm_b_, bottleneck_w_,
      bottleneck_b_, mask_prelu_, mask_w_, mask_b_;
  std::vector<BlockSlots> blocks_;
};

/// Intermediates of one forward pass. Only Separator reads the fields.
struct ForwardTrace {
  ForwardTrace();
  ~ForwardTrace();
  ForwardTrace(ForwardTrace &&) noexcept;
  ForwardTrace &operator=(ForwardTrace &&) noexcept;

  Waveform input;
  Matrix encoder_pre;   // before ReLU
  Matrix features;      // after ReLU
  std::vector<Matrix> masks;
  std::vector<Matrix> masked;
  SeparatedSources output;

  struct Internals;
  std::unique_ptr<Internals> internals;
};

}  // namespace tasnet
