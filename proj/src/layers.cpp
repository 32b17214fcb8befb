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

#include "layers.hpp"

#include <algorithm>
#include <cmath>

#include "tasnet/simd/kernels.hpp"

namespace tasnet::layers {

void PointwiseConv(const Real *weight, const Real *bias, const Matrix &in,
                   Matrix &out) {
  const std::size_t frames = in.cols();
  for (std::size_t o = 0; o < out.rows(); ++o) {
    std::fill(out.row(o), out.row(o) + frames, bias[o]);
  }
  GemmNN(out, ConstMat{weight, out.rows(), in.rows()}, View(in));
}

void PointwiseConvBackward(const Real *weight, const Matrix &in,
                           const Matrix &d_out, Matrix *d_in, Real *d_weight,
                           Real *d_bias) {
  const ConstMat w{weight, d_out.rows(), in.rows()};
  if (d_in != nullptr) GemmTN(*d_in, w, View(d_out));
  GemmNT(d_weight, View(d_out), View(in));
  for (std::size_t o = 0; o < d_out.rows(); ++o) {
    const Real *g = d_out.row(o);
    Real s = 0.0;
    for (std::size_t t = 0; t < d_out.cols(); ++t) s += g[t];
    d_bias[o] += s;
  }
}

namespace {

// Valid output range [t0, t1) for tap offset `shift` over `frames` frames.
inline void TapRange(long shift, long frames, long &t0, long &t1) {
  t0 = std::max(0L, -shift);
  t1 = std::min(frames, frames - shift);
}

}  // namespace

void DepthwiseConv(const Real *weight, const Real *bias, int kernel,
                   int dilation, const Matrix &in, Matrix &out) {
  const auto &k = simd::Active();
  const long frames = static_cast<long>(in.cols());
  const long left = static_cast<long>(kernel - 1) * dilation / 2;
  for (std::size_t h = 0; h < in.rows(); ++h) {
    Real *o = out.row(h);
    const Real *x = in.row(h);
    std::fill(o, o + frames, bias[h]);
    for (int p = 0; p < kernel; ++p) {
      const long shift = static_cast<long>(p) * dilation - left;
      long t0, t1;
      TapRange(shift, frames, t0, t1);
      if (t1 > t0) k.axpy(o + t0, weight[h * kernel + p], x + t0 + shift, t1 - t0);
    }
  }
}

void DepthwiseConvBackward(const Real *weight, int kernel, int dilation,
                           const Matrix &in, const Matrix &d_out, Matrix &d_in,
                           Real *d_weight, Real *d_bias) {
  const auto &k = simd::Active();
  const long frames = static_cast<long>(in.cols());
  const long left = static_cast<long>(kernel - 1) * dilation / 2;
  for (std::size_t h = 0; h < in.rows(); ++h) {
    const Real *g = d_out.row(h);
    const Real *x = in.row(h);
    Real *dx = d_in.row(h);
    Real s = 0.0;
    for (long t = 0; t < frames; ++t) s += g[t];
    d_bias[h] += s;
    for (int p = 0; p < kernel; ++p) {
      const long shift = static_cast<long>(p) * dilation - left;
      long t0, t1;
      TapRange(shift, frames, t0, t1);
      if (t1 <= t0) continue;
      k.axpy(dx + t0 + shift, weight[h * kernel + p], g + t0, t1 - t0);
      d_weight[h * kernel + p] += k.dot(g + t0, x + t0 + shift, t1 - t0);
    }
  }
}

void PRelu(Real alpha, const Matrix &in, Matrix &out) {
  const Real *x = in.data();
  Real *y = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : alpha * x[i];
}

void PReluBackward(Real alpha, const Matrix &in, const Matrix &d_out,
                   Matrix &d_in, Real *d_alpha) {
  const Real *x = in.data();
  const Real *g = d_out.data();
  Real *dx = d_in.data();
  Real da = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (x[i] > 0.0) {
      dx[i] += g[i];
    } else {
      dx[i] += alpha * g[i];
      da += g[i] * x[i];
    }
  }
  *d_alpha += da;
}

namespace {

void GlobalNorm(const Matrix &in, NormState &st) {
  const std::size_t n = in.size();
  const Real *x = in.data();
  Real mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<Real>(n);
  Real var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<Real>(n);
  const Real inv = 1.0 / std::sqrt(var + kNormEps);
  Real *z = st.normalized.data();
  for (std::size_t i = 0; i < n; ++i) z[i] = (x[i] - mean) * inv;
  st.mean.assign(1, mean);
  st.inv_std.assign(1, inv);
}

void CumulativeNorm(const Matrix &in, NormState &st) {
  const std::size_t channels = in.rows();
  const std::size_t frames = in.cols();
  st.mean.assign(frames, 0.0);
  st.inv_std.assign(frames, 0.0);
  Real s1 = 0.0, s2 = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const Real v = in(c, t);
      s1 += v;
      s2 += v * v;
    }
    const Real count = static_cast<Real>(channels * (t + 1));
    const Real mean = s1 / count;
    const Real var = std::max(s2 / count - mean * mean, Real{0});
    st.mean[t] = mean;
    st.inv_std[t] = 1.0 / std::sqrt(var + kNormEps);
  }
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < frames; ++t) {
      st.normalized(c, t) = (in(c, t) - st.mean[t]) * st.inv_std[t];
    }
  }
}

}  // namespace

void Norm(NormKind kind, const Real *gamma, const Real *beta, const Matrix &in,
          Matrix &out, NormState &st) {
  st.input = in;
  st.normalized = Matrix(in.rows(), in.cols());
  if (kind == NormKind::kGlobal) {
    GlobalNorm(in, st);
  } else {
    CumulativeNorm(in, st);
  }
  for (std::size_t c = 0; c < in.rows(); ++c) {
    const Real *z = st.normalized.row(c);
    Real *y = out.row(c);
    for (std::size_t t = 0; t < in.cols(); ++t) y[t] = gamma[c] * z[t] + beta[c];
  }
}

void NormBackward(NormKind kind, const Real *gamma, const NormState &st,
                  const Matrix &d_out, Matrix &d_in, Real *d_gamma,
                  Real *d_beta) {
  const std::size_t channels = d_out.rows();
  const std::size_t frames = d_out.cols();
  // g = dL/d(normalized)
  Matrix g(channels, frames);
  for (std::size_t c = 0; c < channels; ++c) {
    const Real *dy = d_out.row(c);
    const Real *z = st.normalized.row(c);
    Real *gc = g.row(c);
    Real sg = 0.0, sb = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      gc[t] = dy[t] * gamma[c];
      sg += dy[t] * z[t];
      sb += dy[t];
    }
    d_gamma[c] += sg;
    d_beta[c] += sb;
  }

  if (kind == NormKind::kGlobal) {
    const std::size_t n = g.size();
    const Real *gz = g.data();
    const Real *z = st.normalized.data();
    Real mean_g = 0.0, mean_gz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_g += gz[i];
      mean_gz += gz[i] * z[i];
    }
    mean_g /= static_cast<Real>(n);
    mean_gz /= static_cast<Real>(n);
    const Real inv = st.inv_std[0];
    Real *dx = d_in.data();
    for (std::size_t i = 0; i < n; ++i) dx[i] += inv * (gz[i] - mean_g - z[i] * mean_gz);
    return;
  }

  // Cumulative statistics: frame t's mean and second moment depend on all
  // frames j <= t, so the gradient for frame j collects suffix sums.
  std::vector<Real> d_mean(frames), d_second(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    Real a = 0.0, q = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      a += g(c, t);
      q += g(c, t) * st.normalized(c, t);
    }
    const Real r = st.inv_std[t];
    const Real count = static_cast<Real>(channels * (t + 1));
    d_second[t] = (-0.5 * r * r * q) / count;
    d_mean[t] = (-r * a + r * r * st.mean[t] * q) / count;
  }
  Real g1 = 0.0, g2 = 0.0;
  for (std::size_t jj = frames; jj-- > 0;) {
    g1 += d_mean[jj];
    g2 += d_second[jj];
    const Real r = st.inv_std[jj];
    for (std::size_t c = 0; c < channels; ++c) {
      d_in(c, jj) += g(c, jj) * r + g1 + 2.0 * st.input(c, jj) * g2;
    }
  }
}

}  // namespace tasnet::layers
