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

#include "tasnet/common.hpp"

#include <cmath>

namespace tasnet {

std::string_view ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kChannelCount: return "channel-count";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kAlignment: return "alignment";
    case ErrorKind::kTooShort: return "too-short";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kCheckpointMismatch: return "checkpoint-mismatch";
    case ErrorKind::kUndefinedReference: return "undefined-reference";
    case ErrorKind::kRankDeficient: return "rank-deficient";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kBackendLength: return "backend-length";
    case ErrorKind::kBackendMissing: return "backend-missing";
    case ErrorKind::kInsufficientGroups: return "insufficient-groups";
    case ErrorKind::kEmptySplit: return "empty-split";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kMissingReference: return "missing-reference";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

void Throw(ErrorKind kind, const std::string &what) { throw Error(kind, what); }

void Waveform::Validate() const {
  if (sample_rate <= 0) {
    Throw(ErrorKind::kInvalidArgument,
          "sample rate must be positive, got " + std::to_string(sample_rate));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      Throw(ErrorKind::kInvalidArgument,
            "non-finite sample at index " + std::to_string(i));
    }
  }
}

Waveform Slice(const Waveform &w, std::size_t begin, std::size_t length) {
  if (begin + length > w.size()) {
    Throw(ErrorKind::kInvalidArgument, "slice exceeds waveform length");
  }
  return Waveform(std::vector<Real>(w.samples.begin() + begin,
                                    w.samples.begin() + begin + length),
                  w.sample_rate);
}

}  // namespace tasnet
