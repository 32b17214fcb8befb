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

// Separation metrics. SI-SNR and SI-SDR are the same quantity here: both
// zero-mean the signals and project the estimate onto the reference.

#pragma once

#include <span>
#include <vector>

#include "tasnet/common.hpp"
#include "tasnet/model.hpp"

namespace tasnet {

/// Reported values are clamped to [-kDbCap, +kDbCap].
inline constexpr Real kDbCap = 60.0;
/// Added to the error energy, relative to the estimate energy.
inline constexpr Real kRatioEpsilon = 1e-8;

/// Scale-invariant SNR in dB. Throws kAlignment on a length mismatch,
/// kUndefinedReference when the zero-mean reference is all zeros.
Real SiSnr(std::span<const Real> estimate, std::span<const Real> reference);
Real SiSnr(const Waveform &estimate, const Waveform &reference);

/// Same value plus d(SI-SNR)/d(estimate). The gradient is zero when the
/// value sits on a cap.
Real SiSnrWithGrad(std::span<const Real> estimate,
                   std::span<const Real> reference,
                   std::vector<Real> &d_estimate);

struct PitResult {
  Real loss = 0.0;                  // -(mean SI-SNR) under `permutation`
  std::vector<int> permutation;     // estimate i is scored against reference permutation[i]
  std::vector<Real> si_snr;         // per estimate, under `permutation`
  bool swapped() const { return permutation.size() == 2 && permutation[0] == 1; }
};

/// Utterance-level permutation-invariant negative SI-SNR. Every assignment is
/// tried; ties keep the earliest (identity first).
PitResult PitLoss(const SeparatedSources &estimates,
                  std::span<const Waveform> references);

/// As PitLoss; also writes d(loss)/d(estimate_i) for the chosen assignment.
PitResult PitLossWithGrad(const SeparatedSources &estimates,
                          std::span<const Waveform> references,
                          std::vector<std::vector<Real>> &d_estimates);

struct DecompositionResult {
  std::vector<Real> s_target;
  std::vector<Real> e_interf;
  std::vector<Real> e_noise;   // identically zero for noiseless mixtures
  std::vector<Real> e_artif;
  Real sdr_db = 0.0;
  Real si_sdr_db = 0.0;
};

/// Orthogonal-projection decomposition of a (zero-meaned) estimate against
/// the zero-meaned references; `target` selects the true source. Throws
/// kRankDeficient when the references are (numerically) collinear.
DecompositionResult BssDecompose(const Waveform &estimate,
                                 std::span<const Waveform> references,
                                 std::size_t target);

/// Best-permutation mean SI-SDR of the estimates minus the mean SI-SDR of
/// the unprocessed mixture against each reference.
Real SiSdrImprovement(const Waveform &mixture, const SeparatedSources &estimates,
                      std::span<const Waveform> references);

}  // namespace tasnet
