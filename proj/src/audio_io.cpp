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


#include "tasnet/audio_io.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

namespace tasnet {
namespace {

namespace fs = std::filesystem;

std::uint32_t ReadU32(const unsigned char *p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t ReadU16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void PutU32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

std::vector<unsigned char> Slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

AudioData DecodeWav(const std::vector<unsigned char> &bytes, const fs::path &path) {
  const auto fail = [&](const std::string &why) -> void {
    Throw(ErrorKind::kFormat, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const unsigned char *data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    const std::uint32_t len = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) fail("short fmt chunk");
      format = ReadU16(chunk + 8);
      channels = ReadU16(chunk + 10);
      rate = ReadU32(chunk + 12);
      block_align = ReadU16(chunk + 20);
      bits = ReadU16(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 26) fail("short extensible fmt chunk");
        format = ReadU16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = avail;
    }
    pos = body + len + (len & 1u);
  }
  if (channels == 0 || rate == 0) fail("missing or empty fmt chunk");
  if (data == nullptr) fail("missing data chunk");
  const std::size_t width = bits / 8;
  if (width == 0 || block_align != width * channels) fail("inconsistent block alignment");
  const bool pcm = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool flt = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!pcm && !flt) {
    fail("unsupported sample format " + std::to_string(format) + "/" + std::to_string(bits));
  }

  AudioData out;
  out.sample_rate = static_cast<int>(rate);
  const std::size_t frames = data_len / block_align;
  out.channels.assign(channels, std::vector<Real>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char *s = data + f * block_align + c * width;
      Real v = 0.0;
      if (flt && bits == 32) {
        float x;
        std::memcpy(&x, s, 4);
        v = x;
      } else if (flt) {
        double x;
        std::memcpy(&x, s, 8);
        v = x;
      } else if (bits == 8) {
        v = (static_cast<int>(s[0]) - 128) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(ReadU16(s)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = static_cast<std::int32_t>(s[0] | s[1] << 8 | s[2] << 16);
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(ReadU32(s)) / 2147483648.0;
      }
      if (!std::isfinite(v)) fail("non-finite sample");
      out.channels[c][f] = v;
    }
  }
  return out;
}

// -- MPEG audio through a runtime-loaded libmpg123 --------------------------

struct Mpg123 {
  using Handle = void;
  int (*init)() = nullptr;
  Handle *(*create)(const char *, int *) = nullptr;
  int (*open)(Handle *, const char *) = nullptr;
  int (*getformat)(Handle *, long *, int *, int *) = nullptr;
  int (*format_none)(Handle *) = nullptr;
  int (*format)(Handle *, long, int, int) = nullptr;
  int (*read)(Handle *, void *, std::size_t, std::size_t *) = nullptr;
  int (*close)(Handle *) = nullptr;
  void (*destroy)(Handle *) = nullptr;
  const char *(*strerror)(int) = nullptr;
  bool ok = false;

  static constexpr int kOk = 0;
  static constexpr int kDone = -12;
  static constexpr int kNewFormat = -11;
  static constexpr int kEncSigned16 = 0xd0;
};

template <typename F>
bool Bind(void *lib, const char *name, F &fn) {
  fn = reinterpret_cast<F>(::dlsym(lib, name));
  return fn != nullptr;
}

const Mpg123 &LoadMpg123() {
  static const Mpg123 api = [] {
    Mpg123 m;
    void *lib = ::dlopen("libmpg123.so.0", RTLD_NOW | RTLD_LOCAL);
    if (lib == nullptr) return m;
    m.ok = Bind(lib, "mpg123_init", m.init) && Bind(lib, "mpg123_new", m.create) &&
           Bind(lib, "mpg123_open", m.open) && Bind(lib, "mpg123_getformat", m.getformat) &&
           Bind(lib, "mpg123_format_none", m.format_none) &&
           Bind(lib, "mpg123_format", m.format) && Bind(lib, "mpg123_read", m.read) &&
           Bind(lib, "mpg123_close", m.close) && Bind(lib, "mpg123_delete", m.destroy) &&
           Bind(lib, "mpg123_plain_strerror", m.strerror);
    if (m.ok) m.ok = m.init() == Mpg123::kOk;
    return m;
  }();
  return api;
}

AudioData DecodeMp3(const fs::path &path) {
  const Mpg123 &api = LoadMpg123();
  if (!api.ok) Throw(ErrorKind::kFormat, "MPEG decoding unavailable (libmpg123 not found)");
  int err = 0;
  void *h = api.create(nullptr, &err);
  if (h == nullptr) Throw(ErrorKind::kFormat, std::string("mpg123: ") + api.strerror(err));
  struct Closer {
    const Mpg123 &api;
    void *h;
    bool opened = false;
    ~Closer() {
      if (opened) api.close(h);
      api.destroy(h);
    }
  } closer{api, h};

  if (api.open(h, path.c_str()) != Mpg123::kOk) {
    Throw(ErrorKind::kFormat, path.string() + ": not decodable as MPEG audio");
  }
  closer.opened = true;
  long rate = 0;
  int channels = 0, encoding = 0;
  if (api.getformat(h, &rate, &channels, &encoding) != Mpg123::kOk || rate <= 0 ||
      channels <= 0) {
    Throw(ErrorKind::kFormat, path.string() + ": no MPEG audio frames");
  }
  api.format_none(h);
  api.format(h, rate, channels, Mpg123::kEncSigned16);

  std::vector<std::int16_t> pcm;
  std::vector<std::int16_t> buf(16384);
  for (;;) {
    std::size_t done = 0;
    const int rc = api.read(h, buf.data(), buf.size() * sizeof(std::int16_t), &done);
    pcm.insert(pcm.end(), buf.begin(), buf.begin() + static_cast<long>(done / 2));
    if (rc == Mpg123::kDone) break;
    if (rc == Mpg123::kNewFormat) continue;
    if (rc != Mpg123::kOk) {
      Throw(ErrorKind::kFormat, path.string() + ": " + api.strerror(rc));
    }
  }
  AudioData out;
  out.sample_rate = static_cast<int>(rate);
  const std::size_t frames = pcm.size() / static_cast<std::size_t>(channels);
  out.channels.assign(static_cast<std::size_t>(channels), std::vector<Real>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < out.channels.size(); ++c) {
      out.channels[c][f] = pcm[f * out.channels.size() + c] / 32768.0;
    }
  }
  return out;
}

bool LooksLikeMpeg(const std::vector<unsigned char> &b) {
  if (b.size() >= 3 && std::memcmp(b.data(), "ID3", 3) == 0) return true;
  return b.size() >= 2 && b[0] == 0xff && (b[1] & 0xe0) == 0xe0;
}

}  // namespace

bool Mp3DecoderAvailable() { return LoadMpg123().ok; }

AudioData ReadAudio(const fs::path &path) {
  const std::vector<unsigned char> bytes = Slurp(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "RIFF", 4) == 0) {
    return DecodeWav(bytes, path);
  }
  if (LooksLikeMpeg(bytes)) return DecodeMp3(path);
  Throw(ErrorKind::kFormat, path.string() + ": unrecognised audio format");
}

Waveform ReadMono(const fs::path &path) {
  AudioData a = ReadAudio(path);
  if (a.channels.size() != 1) {
    Throw(ErrorKind::kChannelCount, path.string() + " has " +
                                        std::to_string(a.channels.size()) + " channels");
  }
  return Waveform{std::move(a.channels[0]), a.sample_rate};
}

void WriteWav(const fs::path &path, const AudioData &audio, WavEncoding encoding) {
  if (audio.channels.empty()) Throw(ErrorKind::kInvalidArgument, "no channels to write");
  for (const auto &c : audio.channels) {
    if (c.size() != audio.frames()) Throw(ErrorKind::kAlignment, "channel lengths differ");
  }
  const std::uint16_t channels = static_cast<std::uint16_t>(audio.channels.size());
  const std::uint16_t bits = encoding == WavEncoding::kPcm16     ? 16
                             : encoding == WavEncoding::kFloat32 ? 32
                                                                 : 64;
  const std::uint16_t align = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t data_len = static_cast<std::uint32_t>(audio.frames() * align);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  PutU32(out, 36 + data_len);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  PutU16(out, channels);
  PutU32(out, static_cast<std::uint32_t>(audio.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(audio.sample_rate) * align);
  PutU16(out, align);
  PutU16(out, bits);
  out += "data";
  PutU32(out, data_len);
  for (std::size_t f = 0; f < audio.frames(); ++f) {
    for (const auto &c : audio.channels) {
      const Real v = c[f];
      if (encoding == WavEncoding::kPcm16) {
        const long q = std::lround(std::clamp(v, Real{-1}, Real{1}) * 32767.0);
        PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else if (encoding == WavEncoding::kFloat32) {
        const float x = static_cast<float>(v);
        out.append(reinterpret_cast<const char *>(&x), 4);
      } else {
        out.append(reinterpret_cast<const char *>(&v), 8);
      }
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    Throw(ErrorKind::kIo, "cannot write " + path.string());
  }
}

void WriteWav(const fs::path &path, const Waveform &audio, WavEncoding encoding) {
  WriteWav(path, AudioData{{audio.samples}, audio.sample_rate}, encoding);
}

std::vector<Real> Resample(std::span<const Real> x, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) Throw(ErrorKind::kInvalidArgument, "bad sample rate");
  if (from_rate == to_rate) return {x.begin(), x.end()};
  const long g = std::gcd(from_rate, to_rate);
  const long up = to_rate / g, down = from_rate / g;
  const std::size_t out_len = x.size() * static_cast<std::size_t>(up) /
                              static_cast<std::size_t>(down);
  const Real cutoff = std::min(1.0, static_cast<Real>(to_rate) / from_rate);
  constexpr Real kZeroCrossings = 16.0;
  const Real half_width = kZeroCrossings / cutoff;
  const long n_in = static_cast<long>(x.size());
  std::vector<Real> y(out_len, 0.0);
  for (std::size_t n = 0; n < out_len; ++n) {
    const Real t = static_cast<Real>(static_cast<long>(n) * down) / static_cast<Real>(up);
    const long lo = std::max(0L, static_cast<long>(std::ceil(t - half_width)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(t + half_width)));
    Real acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const Real u = t - static_cast<Real>(k);
      const Real arg = std::numbers::pi * cutoff * u;
      const Real sinc = u == 0.0 ? 1.0 : std::sin(arg) / arg;
      const Real w = 0.5 + 0.5 * std::cos(std::numbers::pi * u / half_width);
      acc += x[static_cast<std::size_t>(k)] * cutoff * sinc * w;
    }
    y[n] = acc;
  }
  return y;
}

}  // namespace tasnet
