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

#include "tasnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tasnet {
namespace {

constexpr Real kDbPerNeper = 10.0 / 2.302585092994045684;  // 10 / ln(10)

std::vector<Real> ZeroMean(std::span<const Real> x) {
  Real mean = 0.0;
  for (Real v : x) mean += v;
  mean /= static_cast<Real>(x.size());
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
  return out;
}

Real Energy(std::span<const Real> x) {
  Real e = 0.0;
  for (Real v : x) e += v * v;
  return e;
}

Real InnerProduct(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void CheckPair(std::size_t est, std::size_t ref) {
  if (est != ref) {
    Throw(ErrorKind::kAlignment, "estimate has " + std::to_string(est) +
                                     " samples but reference has " + std::to_string(ref));
  }
  if (est < 2) Throw(ErrorKind::kInvalidArgument, "signals need at least 2 samples");
}

// 10 log10(num / (err + eps * total)), clamped. `capped` reports whether the
// clamp (or the zero-numerator floor) engaged.
Real RatioDb(Real num, Real err, Real total, bool &capped) {
  const Real den = err + kRatioEpsilon * total;
  capped = true;
  if (num <= 0.0 || den <= 0.0) return num <= 0.0 ? -kDbCap : kDbCap;
  const Real db = 10.0 * std::log10(num / den);
  if (db >= kDbCap) return kDbCap;
  if (db <= -kDbCap) return -kDbCap;
  capped = false;
  return db;
}

struct Projection {
  std::vector<Real> x;       // zero-mean estimate
  std::vector<Real> target;  // projection onto the zero-mean reference
  std::vector<Real> error;
  Real target_energy = 0.0;
  Real error_energy = 0.0;
  Real estimate_energy = 0.0;
};

Projection Project(std::span<const Real> estimate, std::span<const Real> reference) {
  CheckPair(estimate.size(), reference.size());
  Projection p;
  p.x = ZeroMean(estimate);
  const std::vector<Real> y = ZeroMean(reference);
  const Real ref_energy = Energy(y);
  if (!(ref_energy > 0.0)) {
    Throw(ErrorKind::kUndefinedReference, "reference is identically zero after zero-meaning");
  }
  const Real scale = InnerProduct(p.x, y) / ref_energy;
  p.target.resize(y.size());
  p.error.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    p.target[i] = scale * y[i];
    p.error[i] = p.x[i] - p.target[i];
  }
  p.target_energy = Energy(p.target);
  p.error_energy = Energy(p.error);
  p.estimate_energy = Energy(p.x);
  return p;
}

std::vector<std::vector<int>> Permutations(int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> all;
  do {
    all.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return all;
}

}  // namespace

Real SiSnr(std::span<const Real> estimate, std::span<const Real> reference) {
  const Projection p = Project(estimate, reference);
  bool capped;
  return RatioDb(p.target_energy, p.error_energy, p.estimate_energy, capped);
}

Real SiSnr(const Waveform &estimate, const Waveform &reference) {
  return SiSnr(estimate.view(), reference.view());
}

Real SiSnrWithGrad(std::span<const Real> estimate, std::span<const Real> reference,
                   std::vector<Real> &d_estimate) {
  const Projection p = Project(estimate, reference);
  bool capped;
  const Real value = RatioDb(p.target_energy, p.error_energy, p.estimate_energy, capped);
  const std::size_t n = p.x.size();
  d_estimate.assign(n, 0.0);
  if (capped) return value;
  // d num/dx = 2 t ; d err/dx = 2 e ; d total/dx = 2 x
  const Real den = p.error_energy + kRatioEpsilon * p.estimate_energy;
  Real mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real g = kDbPerNeper * (2.0 * p.target[i] / p.target_energy -
                                  (2.0 * p.error[i] + 2.0 * kRatioEpsilon * p.x[i]) / den);
    d_estimate[i] = g;
    mean += g;
  }
  // The zero-mean step is a projection; its adjoint removes the mean again.
  mean /= static_cast<Real>(n);
  for (Real &g : d_estimate) g -= mean;
  return value;
}

namespace {

PitResult Pit(const SeparatedSources &estimates, std::span<const Waveform> references,
              std::vector<std::vector<Real>> *d_estimates) {
  const std::size_t c = estimates.estimates.size();
  if (c != references.size() || c < 2) {
    Throw(ErrorKind::kShape, "permutation search needs matching estimate/reference counts");
  }
  // Pairwise scores are computed once; each permutation just sums them.
  std::vector<std::vector<Real>> score(c, std::vector<Real>(c));
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      score[i][j] = SiSnr(estimates.estimates[i], references[j]);
    }
  }
  PitResult best;
  bool first = true;
  for (const auto &perm : Permutations(static_cast<int>(c))) {
    Real mean = 0.0;
    for (std::size_t i = 0; i < c; ++i) mean += score[i][static_cast<std::size_t>(perm[i])];
    mean /= static_cast<Real>(c);
    if (first || -mean < best.loss) {
      best.loss = -mean;
      best.permutation = perm;
      first = false;
    }
  }
  best.si_snr.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    best.si_snr[i] = score[i][static_cast<std::size_t>(best.permutation[i])];
  }
  if (d_estimates != nullptr) {
    d_estimates->assign(c, {});
    for (std::size_t i = 0; i < c; ++i) {
      SiSnrWithGrad(estimates.estimates[i].view(),
                    references[static_cast<std::size_t>(best.permutation[i])].view(),
                    (*d_estimates)[i]);
      for (Real &g : (*d_estimates)[i]) g *= -1.0 / static_cast<Real>(c);
    }
  }
  return best;
}

}  // namespace

PitResult PitLoss(const SeparatedSources &estimates, std::span<const Waveform> references) {
  return Pit(estimates, references, nullptr);
}

PitResult PitLossWithGrad(const SeparatedSources &estimates,
                          std::span<const Waveform> references,
                          std::vector<std::vector<Real>> &d_estimates) {
  return Pit(estimates, references, &d_estimates);
}

DecompositionResult BssDecompose(const Waveform &estimate,
                                 std::span<const Waveform> references,
                                 std::size_t target) {
  const std::size_t k = references.size();
  if (k == 0 || target >= k) {
    Throw(ErrorKind::kInvalidArgument, "target index outside the reference list");
  }
  for (const Waveform &r : references) CheckPair(estimate.size(), r.size());

  const std::vector<Real> x = ZeroMean(estimate.view());
  std::vector<std::vector<Real>> refs;
  for (const Waveform &r : references) refs.push_back(ZeroMean(r.view()));

  // Gram system G c = b for the projection onto span(references), solved by
  // Cholesky. A vanishing pivot means the references are collinear.
  std::vector<Real> gram(k * k), rhs(k);
  Real max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    rhs[i] = InnerProduct(refs[i], x);
    for (std::size_t j = 0; j < k; ++j) gram[i * k + j] = InnerProduct(refs[i], refs[j]);
    max_diag = std::max(max_diag, gram[i * k + i]);
  }
  if (!(max_diag > 0.0)) Throw(ErrorKind::kUndefinedReference, "all references are zero");
  std::vector<Real> chol(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      Real s = gram[i * k + j];
      for (std::size_t m = 0; m < j; ++m) s -= chol[i * k + m] * chol[j * k + m];
      if (i == j) {
        if (s <= 1e-10 * max_diag) {
          Throw(ErrorKind::kRankDeficient, "references are linearly dependent");
        }
        chol[i * k + i] = std::sqrt(s);
      } else {
        chol[i * k + j] = s / chol[j * k + j];
      }
    }
  }
  std::vector<Real> coef(k);
  for (std::size_t i = 0; i < k; ++i) {
    Real s = rhs[i];
    for (std::size_t m = 0; m < i; ++m) s -= chol[i * k + m] * coef[m];
    coef[i] = s / chol[i * k + i];
  }
  for (std::size_t i = k; i-- > 0;) {
    Real s = coef[i];
    for (std::size_t m = i + 1; m < k; ++m) s -= chol[m * k + i] * coef[m];
    coef[i] = s / chol[i * k + i];
  }

  const std::size_t n = x.size();
  const std::vector<Real> &own = refs[target];
  const Real scale = InnerProduct(x, own) / gram[target * k + target];
  DecompositionResult out;
  out.s_target.resize(n);
  out.e_interf.resize(n);
  out.e_noise.assign(n, 0.0);
  out.e_artif.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    Real span_proj = 0.0;
    for (std::size_t i = 0; i < k; ++i) span_proj += coef[i] * refs[i][t];
    out.s_target[t] = scale * own[t];
    out.e_interf[t] = span_proj - out.s_target[t];
    out.e_artif[t] = x[t] - span_proj;
  }
  Real distortion = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const Real d = out.e_interf[t] + out.e_noise[t] + out.e_artif[t];
    distortion += d * d;
  }
  bool capped;
  out.sdr_db = RatioDb(Energy(out.s_target), distortion, Energy(x), capped);
  out.si_sdr_db = SiSnr(estimate, references[target]);
  return out;
}

Real SiSdrImprovement(const Waveform &mixture, const SeparatedSources &estimates,
                      std::span<const Waveform> references) {
  const PitResult pit = PitLoss(estimates, references);
  Real baseline = 0.0;
  for (const Waveform &r : references) baseline += SiSnr(mixture, r);
  baseline /= static_cast<Real>(references.size());
  return -pit.loss - baseline;
}

}  // namespace tasnet
