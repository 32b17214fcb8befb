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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tasnet/common.hpp"

namespace tasnet {

struct StereoCall {
  Waveform source1;  // channel 0
  Waveform source2;  // channel 1
};

/// Splits a two-channel WAV/MP3 recording into its channels, resampled to
/// `target_rate`. Throws kChannelCount unless the file has exactly two.
StereoCall LoadStereoCall(const std::filesystem::path &path, int target_rate = 8000);

struct Mixture {
  Waveform audio;
  bool clipped = false;
  std::size_t clipped_samples = 0;
};

/// Sample-wise sum clipped to [-1, 1]. Throws kAlignment on mismatched
/// lengths or rates.
Mixture MakeMixture(const Waveform &source1, const Waveform &source2);

struct MixtureTriple {
  Waveform mixture;
  Waveform source1;
  Waveform source2;
  std::string group_id;
  int segment_index = 0;
  bool clipped = false;

  std::string sample_id() const;
  std::size_t size() const { return mixture.size(); }
};

/// Consecutive non-overlapping windows; a trailing partial window is dropped.
std::vector<MixtureTriple> SegmentTriples(const StereoCall &call, const std::string &group_id,
                                          Real segment_seconds = 30.0);

/// On-disk reference to one triple, paths relative to the manifest directory.
struct TripleRef {
  std::string sample_id;
  std::string group_id;
  int segment_index = 0;
  std::size_t num_samples = 0;
  int sample_rate = 8000;
  std::string mixture;
  std::string source1;
  std::string source2;

  Real seconds() const { return static_cast<Real>(num_samples) / sample_rate; }
};

struct SplitManifest {
  std::vector<TripleRef> train;
  std::vector<TripleRef> validation;
  std::vector<TripleRef> test;
  std::array<Real, 3> fractions{0.7, 0.2, 0.1};
  std::uint64_t seed = 0;
  Real segment_seconds = 30.0;
  std::filesystem::path root;  // directory the relative paths resolve against

  const std::vector<TripleRef> &split(std::string_view name) const;
  std::size_t size() const { return train.size() + validation.size() + test.size(); }
};

void ValidateFractions(const std::array<Real, 3> &fractions);

/// Partitions groups (not triples) so each split's total duration tracks the
/// requested fractions; every split receives at least one group. The result
/// depends only on the inputs and `seed`. Throws kInsufficientGroups with
/// fewer than three distinct groups.
SplitManifest GroupShuffleSplit(std::span<const TripleRef> triples,
                                const std::array<Real, 3> &fractions, std::uint64_t seed);
SplitManifest GroupShuffleSplit(std::span<const MixtureTriple> triples,
                                const std::array<Real, 3> &fractions, std::uint64_t seed);

TripleRef MakeRef(const MixtureTriple &triple);
/// Writes mixture.wav / s1.wav / s2.wav under `root`/triples/<sample_id>/.
TripleRef WriteTriple(const std::filesystem::path &root, const MixtureTriple &triple);
MixtureTriple LoadTriple(const SplitManifest &manifest, const TripleRef &ref);

void SaveManifest(const SplitManifest &manifest, const std::filesystem::path &path);
SplitManifest LoadManifest(const std::filesystem::path &path);

struct PrepareOptions {
  std::array<Real, 3> fractions{0.7, 0.2, 0.1};
  std::uint64_t seed = 42;
  Real segment_seconds = 30.0;
  int sample_rate = 8000;
};

/// Ingests every .wav/.mp3 under `corpus_dir` as one stereo call. The group
/// of a call is its file stem unless `corpus_dir`/groups.csv maps
/// "relative/path,group". Writes triples and manifest.json into `out_dir`.
SplitManifest PrepareCorpus(const std::filesystem::path &corpus_dir,
                            const std::filesystem::path &out_dir, const PrepareOptions &opts);

struct SyntheticOptions {
  int sample_rate = 8000;
  Real seconds = 1.0;
  Real rms = 0.1;             // per-source RMS over active regions
  bool intermittent = false;  // on/off talk spurts instead of continuous voicing
  std::uint64_t seed = 0;
};

/// Two distinct synthetic talkers: harmonic series on a speaker-specific
/// pitch, shaped by speaker-specific formant weights and a syllable-rate
/// amplitude envelope. `index` selects the speaker pair.
StereoCall SyntheticCall(const SyntheticOptions &opts, std::uint64_t index);

/// `count` single-segment triples, one group per call.
std::vector<MixtureTriple> SyntheticTriples(const SyntheticOptions &opts, std::size_t count);

/// Writes `count` stereo WAV calls into `dir` (call_000.wav, ...).
void WriteSyntheticCorpus(const std::filesystem::path &dir, const SyntheticOptions &opts,
                          std::size_t count);

}  // namespace tasnet
