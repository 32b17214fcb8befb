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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tasnet {

using Real = double;

inline constexpr int kDefaultSampleRate = 8000;

// Every failure raised by the library carries one of these kinds; the CLI
// maps them onto its machine-readable error document.
enum class ErrorKind {
  kInvalidArgument,
  kChannelCount,
  kFormat,
  kAlignment,
  kTooShort,
  kShape,
  kCheckpointMismatch,
  kUndefinedReference,
  kRankDeficient,
  kDimension,
  kBackendLength,
  kBackendMissing,
  kInsufficientGroups,
  kEmptySplit,
  kDivergence,
  kMissingReference,
  kIo,
};

std::string_view ToString(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Throw(ErrorKind kind, const std::string &what);

/// Mono audio buffer. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<Real> samples;
  int sample_rate = kDefaultSampleRate;

  Waveform() = default;
  Waveform(std::vector<Real> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  std::span<const Real> view() const { return samples; }

  /// Throws kInvalidArgument on a non-positive rate or a non-finite sample.
  void Validate() const;
};

Waveform Slice(const Waveform &w, std::size_t begin, std::size_t length);

}  // namespace tasnet
