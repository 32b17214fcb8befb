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

#include <filesystem>
#include <span>
#include <vector>

#include "tasnet/common.hpp"

namespace tasnet {

/// Deinterleaved multichannel audio, samples scaled to [-1, 1].
struct AudioData {
  std::vector<std::vector<Real>> channels;
  int sample_rate = 0;

  std::size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

enum class WavEncoding { kPcm16, kFloat32, kFloat64 };

/// Reads RIFF/WAVE (PCM 8/16/24/32, IEEE float 32/64, extensible headers)
/// or MPEG audio. The format is chosen from the file contents. Throws kIo
/// when the file cannot be opened and kFormat when it cannot be decoded.
AudioData ReadAudio(const std::filesystem::path &path);

void WriteWav(const std::filesystem::path &path, const AudioData &audio,
              WavEncoding encoding = WavEncoding::kFloat32);
void WriteWav(const std::filesystem::path &path, const Waveform &audio,
              WavEncoding encoding = WavEncoding::kFloat32);

/// Mono convenience reader; throws kChannelCount for anything but one channel.
Waveform ReadMono(const std::filesystem::path &path);

/// True when the MPEG decoder library could be loaded.
bool Mp3DecoderAvailable();

/// Band-limited rational resampler (Hann-windowed sinc, 16 zero crossings).
/// Output length is floor(len * to / from).
std::vector<Real> Resample(std::span<const Real> x, int from_rate, int to_rate);

}  // namespace tasnet
