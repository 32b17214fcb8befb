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

#include "tasnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "layers.hpp"
#include "tasnet/simd/kernels.hpp"

namespace tasnet {

std::string_view ToString(MaskNonlinearity m) {
  return m == MaskNonlinearity::kSigmoid ? "sigmoid" : "softmax";
}

std::string_view ToString(NormKind n) {
  return n == NormKind::kGlobal ? "gLN" : "cLN";
}

MaskNonlinearity ParseMaskNonlinearity(std::string_view s) {
  if (s == "sigmoid") return MaskNonlinearity::kSigmoid;
  if (s == "softmax") return MaskNonlinearity::kSoftmax;
  Throw(ErrorKind::kInvalidArgument, "unknown mask nonlinearity: " + std::string(s));
}

NormKind ParseNormKind(std::string_view s) {
  if (s == "gLN" || s == "global") return NormKind::kGlobal;
  if (s == "cLN" || s == "cumulative") return NormKind::kCumulative;
  Throw(ErrorKind::kInvalidArgument, "unknown norm kind: " + std::string(s));
}

SeparatorConfig SeparatorConfig::Full() { return SeparatorConfig{}; }

SeparatorConfig SeparatorConfig::Toy() {
  SeparatorConfig c;
  c.num_filters = 64;
  c.kernel_len = 16;
  c.bottleneck = 32;
  c.conv_channels = 64;
  c.kernel = 3;
  c.blocks_per_repeat = 4;
  c.repeats = 1;
  return c;
}

long SeparatorConfig::ReceptiveFieldFrames() const {
  long rf = 1;
  for (int b = 0; b < num_blocks(); ++b) rf += static_cast<long>(kernel - 1) * Dilation(b);
  return rf;
}

long SeparatorConfig::ReceptiveFieldSamples() const {
  return (ReceptiveFieldFrames() - 1) * stride() + kernel_len;
}

double SeparatorConfig::ReceptiveFieldSeconds(int sample_rate) const {
  return static_cast<double>(ReceptiveFieldSamples()) / sample_rate;
}

std::size_t SeparatorConfig::NumFrames(std::size_t length) const {
  const auto l = static_cast<std::size_t>(kernel_len);
  if (length < l) {
    Throw(ErrorKind::kTooShort, "input of " + std::to_string(length) +
                                    " samples is shorter than the encoder kernel (" +
                                    std::to_string(kernel_len) + ")");
  }
  return (length - l) / static_cast<std::size_t>(stride()) + 1;
}

void SeparatorConfig::Validate() const {
  const int fields[] = {num_filters, kernel_len, bottleneck, conv_channels,
                        kernel,      blocks_per_repeat, repeats, num_sources};
  for (int v : fields) {
    if (v < 1) Throw(ErrorKind::kInvalidArgument, "separator sizes must be >= 1");
  }
  if (kernel_len % 2 != 0) {
    Throw(ErrorKind::kInvalidArgument, "kernel_len must be even for 50% overlap");
  }
  if (num_sources < 2) Throw(ErrorKind::kInvalidArgument, "num_sources must be >= 2");
  if (blocks_per_repeat > 30) {
    Throw(ErrorKind::kInvalidArgument, "blocks_per_repeat too large");
  }
}

struct BlockTrace {
  Matrix input;
  Matrix in_conv;
  layers::NormState norm1;
  Matrix normed1;
  Matrix depthwise;
  layers::NormState norm2;
  Matrix normed2;
};

struct ForwardTrace::Internals {
  layers::NormState input_norm;
  Matrix normed_features;
  std::vector<BlockTrace> blocks;
  Matrix skip_sum;
  Matrix mask_input;
};

ForwardTrace::ForwardTrace() = default;
ForwardTrace::~ForwardTrace() = default;
ForwardTrace::ForwardTrace(ForwardTrace &&) noexcept = default;
ForwardTrace &ForwardTrace::operator=(ForwardTrace &&) noexcept = default;

Separator::Separator(SeparatorConfig cfg) : cfg_(cfg) {
  cfg_.Validate();
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  const auto l = static_cast<std::size_t>(cfg_.kernel_len);
  const auto b = static_cast<std::size_t>(cfg_.bottleneck);
  const auto h = static_cast<std::size_t>(cfg_.conv_channels);
  const auto p = static_cast<std::size_t>(cfg_.kernel);
  const auto c = static_cast<std::size_t>(cfg_.num_sources);

  enc_basis_ = params_.Add("encoder.basis", {n, l});
  dec_basis_ = params_.Add("decoder.basis", {n, l});
  in_norm_g_ = params_.Add("separator.input_norm.gamma", {n});
  in_norm_b_ = params_.Add("separator.input_norm.beta", {n});
  bottleneck_w_ = params_.Add("separator.bottleneck.weight", {b, n});
  bottleneck_b_ = params_.Add("separator.bottleneck.bias", {b});
  for (int i = 0; i < cfg_.num_blocks(); ++i) {
    const std::string pre = "separator.blocks." + std::to_string(i) + ".";
    BlockSlots s{};
    s.in_w = params_.Add(pre + "in_conv.weight", {h, b});
    s.in_b = params_.Add(pre + "in_conv.bias", {h});
    s.prelu1 = params_.Add(pre + "prelu1", {1});
    s.norm1_g = params_.Add(pre + "norm1.gamma", {h});
    s.norm1_b = params_.Add(pre + "norm1.beta", {h});
    s.dw_w = params_.Add(pre + "depthwise.weight", {h, p});
    s.dw_b = params_.Add(pre + "depthwise.bias", {h});
    s.prelu2 = params_.Add(pre + "prelu2", {1});
    s.norm2_g = params_.Add(pre + "norm2.gamma", {h});
    s.norm2_b = params_.Add(pre + "norm2.beta", {h});
    s.res_w = params_.Add(pre + "residual.weight", {b, h});
    s.res_b = params_.Add(pre + "residual.bias", {b});
    s.skip_w = params_.Add(pre + "skip.weight", {b, h});
    s.skip_b = params_.Add(pre + "skip.bias", {b});
    blocks_.push_back(s);
  }
  mask_prelu_ = params_.Add("separator.mask_prelu", {1});
  mask_w_ = params_.Add("separator.mask_conv.weight", {c * n, b});
  mask_b_ = params_.Add("separator.mask_conv.bias", {c * n});
}

void Separator::InitRandom(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t slot, std::size_t fan_in) {
    const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
    std::uniform_real_distribution<Real> dist(-bound, bound);
    for (Real &v : params_.tensor(slot)) v = dist(rng);
  };
  auto fill = [&](std::size_t slot, Real value) {
    for (Real &v : params_.tensor(slot)) v = value;
  };
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  const auto l = static_cast<std::size_t>(cfg_.kernel_len);
  const auto b = static_cast<std::size_t>(cfg_.bottleneck);
  const auto h = static_cast<std::size_t>(cfg_.conv_channels);
  const auto p = static_cast<std::size_t>(cfg_.kernel);

  std::normal_distribution<Real> xavier(0.0, std::sqrt(2.0 / static_cast<Real>(l + n * l)));
  for (Real &v : params_.tensor(enc_basis_)) v = xavier(rng);
  for (Real &v : params_.tensor(dec_basis_)) v = xavier(rng);
  fill(in_norm_g_, 1.0);
  fill(in_norm_b_, 0.0);
  uniform(bottleneck_w_, n);
  uniform(bottleneck_b_, n);
  for (const auto &s : blocks_) {
    uniform(s.in_w, b);
    uniform(s.in_b, b);
    fill(s.prelu1, 0.25);
    fill(s.norm1_g, 1.0);
    fill(s.norm1_b, 0.0);
    uniform(s.dw_w, p);
    uniform(s.dw_b, p);
    fill(s.prelu2, 0.25);
    fill(s.norm2_g, 1.0);
    fill(s.norm2_b, 0.0);
    uniform(s.res_w, h);
    uniform(s.res_b, h);
    uniform(s.skip_w, h);
    uniform(s.skip_b, h);
  }
  fill(mask_prelu_, 0.25);
  uniform(mask_w_, b);
  uniform(mask_b_, b);
}

namespace {

// frames[l, k] = x[k * stride + l]
Matrix Frame(std::span<const Real> x, std::size_t frame_len, std::size_t stride,
             std::size_t frames) {
  Matrix out(frame_len, frames);
  for (std::size_t l = 0; l < frame_len; ++l) {
    Real *row = out.row(l);
    for (std::size_t k = 0; k < frames; ++k) row[k] = x[k * stride + l];
  }
  return out;
}

Real Sigmoid(Real z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

Matrix Separator::Encode(const Waveform &mixture) const {
  const std::size_t frames = cfg_.NumFrames(mixture.size());
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  const auto l = static_cast<std::size_t>(cfg_.kernel_len);
  Matrix framed = Frame(mixture.samples, l, static_cast<std::size_t>(cfg_.stride()), frames);
  Matrix out(n, frames);
  GemmNN(out, ConstMat{params_.ptr(enc_basis_), n, l}, View(framed));
  for (Real &v : out.storage()) v = std::max(v, Real{0});
  return out;
}

Matrix Separator::RunTcn(const Matrix &features, ForwardTrace *trace,
                         bool bypass_norm) const {
  const std::size_t frames = features.cols();
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  const auto b = static_cast<std::size_t>(cfg_.bottleneck);
  const auto h = static_cast<std::size_t>(cfg_.conv_channels);
  ForwardTrace::Internals *in = trace ? trace->internals.get() : nullptr;

  layers::NormState scratch;
  Matrix normed(n, frames);
  if (bypass_norm) {
    normed = features;
  } else {
    layers::Norm(cfg_.norm, params_.ptr(in_norm_g_), params_.ptr(in_norm_b_),
                 features, normed, in ? in->input_norm : scratch);
  }
  Matrix z(b, frames);
  layers::PointwiseConv(params_.ptr(bottleneck_w_), params_.ptr(bottleneck_b_), normed, z);
  if (in) {
    in->normed_features = std::move(normed);
    in->blocks.resize(blocks_.size());
  }

  Matrix skip_sum(b, frames);
  Matrix a(h, frames), act(h, frames), nrm(h, frames), dw(h, frames);
  Matrix res(b, frames), skip(b, frames);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const BlockSlots &s = blocks_[i];
    BlockTrace *bt = in ? &in->blocks[i] : nullptr;
    if (bt) bt->input = z;

    layers::PointwiseConv(params_.ptr(s.in_w), params_.ptr(s.in_b), z, a);
    layers::PRelu(params_.ptr(s.prelu1)[0], a, act);
    if (bypass_norm) {
      nrm = act;
    } else {
      layers::Norm(cfg_.norm, params_.ptr(s.norm1_g), params_.ptr(s.norm1_b), act,
                   nrm, bt ? bt->norm1 : scratch);
    }
    layers::DepthwiseConv(params_.ptr(s.dw_w), params_.ptr(s.dw_b), cfg_.kernel,
                          cfg_.Dilation(static_cast<int>(i)), nrm, dw);
    if (bt) {
      bt->in_conv = a;
      bt->normed1 = nrm;
      bt->depthwise = dw;
    }
    layers::PRelu(params_.ptr(s.prelu2)[0], dw, act);
    if (bypass_norm) {
      nrm = act;
    } else {
      layers::Norm(cfg_.norm, params_.ptr(s.norm2_g), params_.ptr(s.norm2_b), act,
                   nrm, bt ? bt->norm2 : scratch);
    }
    if (bt) bt->normed2 = nrm;

    layers::PointwiseConv(params_.ptr(s.res_w), params_.ptr(s.res_b), nrm, res);
    layers::PointwiseConv(params_.ptr(s.skip_w), params_.ptr(s.skip_b), nrm, skip);
    Axpy(z.span(), 1.0, res.span());
    Axpy(skip_sum.span(), 1.0, skip.span());
  }
  return skip_sum;
}

namespace {

std::vector<Matrix> MaskHead(const SeparatorConfig &cfg, const Matrix &logits) {
  const auto n = static_cast<std::size_t>(cfg.num_filters);
  const auto c = static_cast<std::size_t>(cfg.num_sources);
  const std::size_t frames = logits.cols();
  std::vector<Matrix> masks(c, Matrix(n, frames));
  if (cfg.mask == MaskNonlinearity::kSigmoid) {
    for (std::size_t s = 0; s < c; ++s) {
      for (std::size_t f = 0; f < n; ++f) {
        const Real *z = logits.row(s * n + f);
        Real *m = masks[s].row(f);
        for (std::size_t t = 0; t < frames; ++t) m[t] = Sigmoid(z[t]);
      }
    }
    return masks;
  }
  std::vector<Real> e(c);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t t = 0; t < frames; ++t) {
      Real mx = logits(f, t);
      for (std::size_t s = 1; s < c; ++s) mx = std::max(mx, logits(s * n + f, t));
      Real sum = 0.0;
      for (std::size_t s = 0; s < c; ++s) {
        e[s] = std::exp(logits(s * n + f, t) - mx);
        sum += e[s];
      }
      for (std::size_t s = 0; s < c; ++s) masks[s](f, t) = e[s] / sum;
    }
  }
  return masks;
}

}  // namespace

std::vector<Matrix> Separator::EstimateMasks(const Matrix &features) const {
  Matrix skip_sum = RunTcn(features, nullptr, false);
  Matrix mask_in(skip_sum.rows(), skip_sum.cols());
  layers::PRelu(params_.ptr(mask_prelu_)[0], skip_sum, mask_in);
  Matrix logits(static_cast<std::size_t>(cfg_.num_sources * cfg_.num_filters),
                features.cols());
  layers::PointwiseConv(params_.ptr(mask_w_), params_.ptr(mask_b_), mask_in, logits);
  return MaskHead(cfg_, logits);
}

SeparatedSources Separator::Decode(std::span<const Matrix> masked,
                                   std::size_t output_length,
                                   int sample_rate) const {
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  const auto l = static_cast<std::size_t>(cfg_.kernel_len);
  const auto stride = static_cast<std::size_t>(cfg_.stride());
  if (masked.size() != static_cast<std::size_t>(cfg_.num_sources)) {
    Throw(ErrorKind::kShape, "decode expects " + std::to_string(cfg_.num_sources) +
                                 " masked feature maps, got " +
                                 std::to_string(masked.size()));
  }
  SeparatedSources out;
  for (const Matrix &m : masked) {
    if (m.rows() != n || m.cols() == 0 || m.cols() != masked[0].cols()) {
      Throw(ErrorKind::kShape, "masked feature map has inconsistent shape");
    }
    const std::size_t frames = m.cols();
    Matrix framed(l, frames);
    GemmTN(framed, ConstMat{params_.ptr(dec_basis_), n, l}, View(m));
    std::vector<Real> wave(std::max(output_length, (frames - 1) * stride + l), 0.0);
    for (std::size_t k = 0; k < l; ++k) {
      const Real *row = framed.row(k);
      for (std::size_t f = 0; f < frames; ++f) wave[f * stride + k] += row[f];
    }
    wave.resize(output_length);
    out.estimates.emplace_back(std::move(wave), sample_rate);
  }
  return out;
}

SeparatedSources Separator::Forward(const Waveform &mixture) const {
  Matrix features = Encode(mixture);
  std::vector<Matrix> masks = EstimateMasks(features);
  for (Matrix &m : masks) {
    simd::Active().multiply(m.data(), m.data(), features.data(), m.size());
  }
  return Decode(masks, mixture.size(), mixture.sample_rate);
}

ForwardTrace Separator::ForwardWithTrace(const Waveform &mixture) const {
  ForwardTrace tr;
  tr.internals = std::make_unique<ForwardTrace::Internals>();
  tr.input = mixture;
  const std::size_t frames = cfg_.NumFrames(mixture.size());
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  const auto l = static_cast<std::size_t>(cfg_.kernel_len);
  Matrix framed = Frame(mixture.samples, l, static_cast<std::size_t>(cfg_.stride()), frames);
  tr.encoder_pre = Matrix(n, frames);
  GemmNN(tr.encoder_pre, ConstMat{params_.ptr(enc_basis_), n, l}, View(framed));
  tr.features = tr.encoder_pre;
  for (Real &v : tr.features.storage()) v = std::max(v, Real{0});

  ForwardTrace::Internals &in = *tr.internals;
  in.skip_sum = RunTcn(tr.features, &tr, false);
  in.mask_input = Matrix(in.skip_sum.rows(), frames);
  layers::PRelu(params_.ptr(mask_prelu_)[0], in.skip_sum, in.mask_input);
  Matrix logits(static_cast<std::size_t>(cfg_.num_sources) * n, frames);
  layers::PointwiseConv(params_.ptr(mask_w_), params_.ptr(mask_b_), in.mask_input, logits);
  tr.masks = MaskHead(cfg_, logits);
  for (const Matrix &m : tr.masks) {
    Matrix x(n, frames);
    simd::Active().multiply(x.data(), m.data(), tr.features.data(), m.size());
    tr.masked.push_back(std::move(x));
  }
  tr.output = Decode(tr.masked, mixture.size(), mixture.sample_rate);
  return tr;
}

void Separator::Backward(const ForwardTrace &tr,
                         std::span<const std::vector<Real>> d_estimates,
                         std::span<Real> grad) const {
  if (grad.size() != params_.total_size()) {
    Throw(ErrorKind::kShape, "gradient buffer does not match parameter layout");
  }
  const auto c = static_cast<std::size_t>(cfg_.num_sources);
  if (d_estimates.size() != c) Throw(ErrorKind::kShape, "one gradient per source expected");
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  const auto l = static_cast<std::size_t>(cfg_.kernel_len);
  const auto b = static_cast<std::size_t>(cfg_.bottleneck);
  const auto h = static_cast<std::size_t>(cfg_.conv_channels);
  const auto stride = static_cast<std::size_t>(cfg_.stride());
  const std::size_t frames = tr.features.cols();
  const std::size_t length = tr.input.size();
  auto g = [&](std::size_t slot) { return grad.data() + params_.slot(slot).offset; };
  const ForwardTrace::Internals &in = *tr.internals;

  // Decoder and masking.
  Matrix d_features(n, frames);
  std::vector<Matrix> d_masks;
  for (std::size_t s = 0; s < c; ++s) {
    const std::vector<Real> &dy = d_estimates[s];
    if (dy.size() != length) Throw(ErrorKind::kShape, "estimate gradient length mismatch");
    Matrix d_framed(l, frames);
    for (std::size_t k = 0; k < l; ++k) {
      Real *row = d_framed.row(k);
      for (std::size_t f = 0; f < frames; ++f) row[f] = dy[f * stride + k];
    }
    GemmNT(g(dec_basis_), View(tr.masked[s]), View(d_framed));
    Matrix d_masked(n, frames);
    GemmNN(d_masked, ConstMat{params_.ptr(dec_basis_), n, l}, View(d_framed));

    Matrix d_mask(n, frames);
    simd::Active().multiply(d_mask.data(), d_masked.data(), tr.features.data(), d_mask.size());
    const Real *dm = d_masked.data();
    const Real *m = tr.masks[s].data();
    Real *df = d_features.data();
    for (std::size_t i = 0; i < d_features.size(); ++i) df[i] += dm[i] * m[i];
    d_masks.push_back(std::move(d_mask));
  }

  // Mask nonlinearity.
  Matrix d_logits(c * n, frames);
  if (cfg_.mask == MaskNonlinearity::kSigmoid) {
    for (std::size_t s = 0; s < c; ++s) {
      for (std::size_t f = 0; f < n; ++f) {
        const Real *m = tr.masks[s].row(f);
        const Real *dm = d_masks[s].row(f);
        Real *dz = d_logits.row(s * n + f);
        for (std::size_t t = 0; t < frames; ++t) dz[t] = dm[t] * m[t] * (1.0 - m[t]);
      }
    }
  } else {
    for (std::size_t f = 0; f < n; ++f) {
      for (std::size_t t = 0; t < frames; ++t) {
        Real dot = 0.0;
        for (std::size_t s = 0; s < c; ++s) dot += tr.masks[s](f, t) * d_masks[s](f, t);
        for (std::size_t s = 0; s < c; ++s) {
          d_logits(s * n + f, t) = tr.masks[s](f, t) * (d_masks[s](f, t) - dot);
        }
      }
    }
  }

  Matrix d_mask_in(b, frames);
  layers::PointwiseConvBackward(params_.ptr(mask_w_), in.mask_input, d_logits,
                                &d_mask_in, g(mask_w_), g(mask_b_));
  Matrix d_skip(b, frames);
  layers::PReluBackward(params_.ptr(mask_prelu_)[0], in.skip_sum, d_mask_in, d_skip,
                        g(mask_prelu_));

  // TCN, last block first. The final residual stream output is unused.
  Matrix d_z(b, frames);
  Matrix d_n2(h, frames), d_act2(h, frames), d_dw(h, frames), d_n1(h, frames),
      d_act1(h, frames), d_a(h, frames);
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const BlockSlots &s = blocks_[i];
    const BlockTrace &bt = in.blocks[i];
    for (Matrix *m : {&d_n2, &d_act2, &d_dw, &d_n1, &d_act1, &d_a}) m->SetZero();

    layers::PointwiseConvBackward(params_.ptr(s.res_w), bt.normed2, d_z, &d_n2,
                                  g(s.res_w), g(s.res_b));
    layers::PointwiseConvBackward(params_.ptr(s.skip_w), bt.normed2, d_skip, &d_n2,
                                  g(s.skip_w), g(s.skip_b));
    layers::NormBackward(cfg_.norm, params_.ptr(s.norm2_g), bt.norm2, d_n2, d_act2,
                         g(s.norm2_g), g(s.norm2_b));
    layers::PReluBackward(params_.ptr(s.prelu2)[0], bt.depthwise, d_act2, d_dw,
                          g(s.prelu2));
    layers::DepthwiseConvBackward(params_.ptr(s.dw_w), cfg_.kernel,
                                  cfg_.Dilation(static_cast<int>(i)), bt.normed1, d_dw,
                                  d_n1, g(s.dw_w), g(s.dw_b));
    layers::NormBackward(cfg_.norm, params_.ptr(s.norm1_g), bt.norm1, d_n1, d_act1,
                         g(s.norm1_g), g(s.norm1_b));
    layers::PReluBackward(params_.ptr(s.prelu1)[0], bt.in_conv, d_act1, d_a, g(s.prelu1));
    // d_z already holds the identity path of the residual connection.
    layers::PointwiseConvBackward(params_.ptr(s.in_w), bt.input, d_a, &d_z, g(s.in_w),
                                  g(s.in_b));
  }

  Matrix d_normed(n, frames);
  layers::PointwiseConvBackward(params_.ptr(bottleneck_w_), in.normed_features, d_z,
                                &d_normed, g(bottleneck_w_), g(bottleneck_b_));
  layers::NormBackward(cfg_.norm, params_.ptr(in_norm_g_), in.input_norm, d_normed,
                       d_features, g(in_norm_g_), g(in_norm_b_));

  // Encoder ReLU and basis.
  const Real *pre = tr.encoder_pre.data();
  Real *df = d_features.data();
  for (std::size_t i = 0; i < d_features.size(); ++i) {
    if (pre[i] <= 0.0) df[i] = 0.0;
  }
  Matrix framed = Frame(tr.input.samples, l, stride, frames);
  GemmNT(g(enc_basis_), View(d_features), View(framed));
}

long Separator::MeasureReceptiveFieldFrames(std::size_t probe_frames) const {
  const auto n = static_cast<std::size_t>(cfg_.num_filters);
  Matrix base(n, probe_frames, 0.0);
  Matrix impulse = base;
  const std::size_t centre = probe_frames / 2;
  for (std::size_t f = 0; f < n; ++f) impulse(f, centre) = 1.0;
  const Matrix a = RunTcn(base, nullptr, true);
  const Matrix b = RunTcn(impulse, nullptr, true);
  long affected = 0;
  for (std::size_t t = 0; t < probe_frames; ++t) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
      if (a(r, t) != b(r, t)) {
        ++affected;
        break;
      }
    }
  }
  return affected;
}

}  // namespace tasnet
