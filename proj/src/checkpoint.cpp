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

#include "tasnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

namespace tasnet {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'A', 'S', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string ShapeString(const std::vector<std::size_t> &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t Numel(const std::vector<std::size_t> &shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::vector<char> Slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

json ToJson(const SeparatorConfig &cfg) {
  return {{"num_filters", cfg.num_filters},
          {"kernel_len", cfg.kernel_len},
          {"bottleneck", cfg.bottleneck},
          {"conv_channels", cfg.conv_channels},
          {"kernel", cfg.kernel},
          {"blocks_per_repeat", cfg.blocks_per_repeat},
          {"repeats", cfg.repeats},
          {"num_sources", cfg.num_sources},
          {"mask", std::string(ToString(cfg.mask))},
          {"norm", std::string(ToString(cfg.norm))}};
}

SeparatorConfig SeparatorConfigFromJson(const json &j, const SeparatorConfig &base) {
  SeparatorConfig c = base;
  try {
    c.num_filters = j.value("num_filters", c.num_filters);
    c.kernel_len = j.value("kernel_len", c.kernel_len);
    c.bottleneck = j.value("bottleneck", c.bottleneck);
    c.conv_channels = j.value("conv_channels", c.conv_channels);
    c.kernel = j.value("kernel", c.kernel);
    c.blocks_per_repeat = j.value("blocks_per_repeat", c.blocks_per_repeat);
    c.repeats = j.value("repeats", c.repeats);
    c.num_sources = j.value("num_sources", c.num_sources);
    if (j.contains("mask")) c.mask = ParseMaskNonlinearity(j["mask"].get<std::string>());
    if (j.contains("norm")) c.norm = ParseNormKind(j["norm"].get<std::string>());
  } catch (const json::exception &e) {
    Throw(ErrorKind::kInvalidArgument, std::string("bad model config: ") + e.what());
  }
  c.Validate();
  return c;
}

void SaveCheckpoint(const Separator &model, const fs::path &path, const json &metadata) {
  const ParamStore &p = model.params();
  json tensors = json::array();
  for (const ParamSlot &s : p.slots()) {
    tensors.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", s.offset}});
  }
  const std::string header =
      json{{"config", ToJson(model.config())}, {"metadata", metadata}, {"tensors", tensors}}
          .dump();
  const std::uint64_t header_len = header.size();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char *>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char *>(&header_len), sizeof(header_len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char *>(p.values().data()),
              static_cast<std::streamsize>(p.values().size() * sizeof(Real)));
    if (!out) Throw(ErrorKind::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint ReadCheckpoint(const fs::path &path) {
  const std::vector<char> bytes = Slurp(path);
  constexpr std::size_t kPrefix = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    Throw(ErrorKind::kFormat, path.string() + ": not a tasnet checkpoint");
  }
  std::uint32_t version;
  std::uint64_t header_len;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&header_len, bytes.data() + 12, 8);
  if (version != kVersion) {
    Throw(ErrorKind::kFormat, path.string() + ": unsupported version " + std::to_string(version));
  }
  if (header_len > bytes.size() - kPrefix) Throw(ErrorKind::kFormat, "truncated header");
  Checkpoint ck;
  std::size_t data_start = kPrefix + header_len;
  try {
    const json h = json::parse(bytes.begin() + kPrefix, bytes.begin() + static_cast<long>(data_start));
    ck.config = SeparatorConfigFromJson(h.at("config"));
    ck.metadata = h.value("metadata", json::object());
    const std::size_t total = (bytes.size() - data_start) / sizeof(Real);
    for (const json &t : h.at("tensors")) {
      NamedTensor nt;
      nt.name = t.at("name").get<std::string>();
      nt.shape = t.at("shape").get<std::vector<std::size_t>>();
      const std::size_t offset = t.at("offset").get<std::size_t>();
      const std::size_t n = Numel(nt.shape);
      if (offset + n > total) Throw(ErrorKind::kFormat, "tensor " + nt.name + " is truncated");
      nt.values.resize(n);
      std::memcpy(nt.values.data(), bytes.data() + data_start + offset * sizeof(Real),
                  n * sizeof(Real));
      ck.tensors.push_back(std::move(nt));
    }
  } catch (const json::exception &e) {
    Throw(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return ck;
}

void ApplyCheckpoint(const Checkpoint &ckpt, Separator &model) {
  ParamStore &p = model.params();
  std::map<std::string, const NamedTensor *> by_name;
  for (const NamedTensor &t : ckpt.tensors) by_name[t.name] = &t;
  std::vector<std::string> problems;
  for (const ParamSlot &s : p.slots()) {
    const auto it = by_name.find(s.name);
    if (it == by_name.end()) {
      problems.push_back(s.name + " (missing)");
    } else if (it->second->shape != s.shape) {
      problems.push_back(s.name + " (expected " + ShapeString(s.shape) + ", found " +
                         ShapeString(it->second->shape) + ")");
    }
  }
  for (const NamedTensor &t : ckpt.tensors) {
    if (!p.Find(t.name)) problems.push_back(t.name + " (unexpected)");
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match the model:";
    for (const std::string &s : problems) msg += "\n  " + s;
    Throw(ErrorKind::kCheckpointMismatch, msg);
  }
  for (std::size_t i = 0; i < p.num_slots(); ++i) {
    const NamedTensor &t = *by_name.at(p.slot(i).name);
    std::copy(t.values.begin(), t.values.end(), p.tensor(i).begin());
  }
}

Separator LoadSeparator(const fs::path &path) {
  const Checkpoint ck = ReadCheckpoint(path);
  Separator model(ck.config);
  ApplyCheckpoint(ck, model);
  return model;
}

namespace {

Real HalfToDouble(std::uint16_t h) {
  const int sign = h >> 15;
  const int exp = (h >> 10) & 0x1f;
  const int frac = h & 0x3ff;
  Real v;
  if (exp == 0) {
    v = std::ldexp(static_cast<Real>(frac), -24);
  } else if (exp == 31) {
    v = frac ? std::numeric_limits<Real>::quiet_NaN() : std::numeric_limits<Real>::infinity();
  } else {
    v = std::ldexp(static_cast<Real>(frac + 1024), exp - 25);
  }
  return sign ? -v : v;
}

}  // namespace

std::vector<NamedTensor> ReadSafetensors(const fs::path &path) {
  const std::vector<char> bytes = Slurp(path);
  if (bytes.size() < 8) Throw(ErrorKind::kFormat, path.string() + ": too short");
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data(), 8);
  if (header_len > bytes.size() - 8) Throw(ErrorKind::kFormat, path.string() + ": bad header");
  const char *data = bytes.data() + 8 + header_len;
  const std::size_t data_len = bytes.size() - 8 - header_len;
  std::vector<NamedTensor> out;
  try {
    const json h = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<long>(header_len));
    for (const auto &[name, info] : h.items()) {
      if (name == "__metadata__") continue;
      NamedTensor t;
      t.name = name;
      t.shape = info.at("shape").get<std::vector<std::size_t>>();
      const std::string dtype = info.at("dtype").get<std::string>();
      const auto range = info.at("data_offsets").get<std::array<std::size_t, 2>>();
      const std::size_t n = Numel(t.shape);
      const std::size_t width = dtype == "F64" ? 8 : dtype == "F32" ? 4
                                : (dtype == "F16" || dtype == "BF16") ? 2 : 0;
      if (width == 0) Throw(ErrorKind::kFormat, name + ": unsupported dtype " + dtype);
      if (range[1] > data_len || range[1] - range[0] != n * width) {
        Throw(ErrorKind::kFormat, name + ": data range does not match its shape");
      }
      t.values.resize(n);
      const char *src = data + range[0];
      for (std::size_t i = 0; i < n; ++i) {
        if (dtype == "F64") {
          std::memcpy(&t.values[i], src + 8 * i, 8);
        } else if (dtype == "F32") {
          float f;
          std::memcpy(&f, src + 4 * i, 4);
          t.values[i] = f;
        } else {
          std::uint16_t b;
          std::memcpy(&b, src + 2 * i, 2);
          if (dtype == "F16") {
            t.values[i] = HalfToDouble(b);
          } else {
            const std::uint32_t bits = std::uint32_t(b) << 16;
            float f;
            std::memcpy(&f, &bits, 4);
            t.values[i] = f;
          }
        }
      }
      out.push_back(std::move(t));
    }
  } catch (const json::exception &e) {
    Throw(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return out;
}

std::string MapAsteroidName(const std::string &name) {
  static const std::map<std::string, std::string> kFixed = {
      {"encoder.filterbank._filters", "encoder.basis"},
      {"decoder.filterbank._filters", "decoder.basis"},
      {"masker.bottleneck.0.gamma", "separator.input_norm.gamma"},
      {"masker.bottleneck.0.beta", "separator.input_norm.beta"},
      {"masker.bottleneck.1.weight", "separator.bottleneck.weight"},
      {"masker.bottleneck.1.bias", "separator.bottleneck.bias"},
      {"masker.mask_net.0.weight", "separator.mask_prelu"},
      {"masker.mask_net.1.weight", "separator.mask_conv.weight"},
      {"masker.mask_net.1.bias", "separator.mask_conv.bias"},
  };
  static const std::map<std::string, std::string> kBlock = {
      {"shared_block.0.weight", "in_conv.weight"},   {"shared_block.0.bias", "in_conv.bias"},
      {"shared_block.1.weight", "prelu1"},           {"shared_block.2.gamma", "norm1.gamma"},
      {"shared_block.2.beta", "norm1.beta"},         {"shared_block.3.weight", "depthwise.weight"},
      {"shared_block.3.bias", "depthwise.bias"},     {"shared_block.4.weight", "prelu2"},
      {"shared_block.5.gamma", "norm2.gamma"},       {"shared_block.5.beta", "norm2.beta"},
      {"res_conv.weight", "residual.weight"},        {"res_conv.bias", "residual.bias"},
      {"skip_conv.weight", "skip.weight"},           {"skip_conv.bias", "skip.bias"},
  };
  std::string key = name;
  if (key.rfind("model.", 0) == 0) key = key.substr(6);
  if (const auto it = kFixed.find(key); it != kFixed.end()) return it->second;
  static const std::regex kTcn(R"(masker\.TCN\.(\d+)\.(.+))");
  std::smatch m;
  if (std::regex_match(key, m, kTcn)) {
    if (const auto it = kBlock.find(m[2].str()); it != kBlock.end()) {
      return "separator.blocks." + m[1].str() + "." + it->second;
    }
  }
  return {};
}

Checkpoint ImportAsteroid(const fs::path &path, const SeparatorConfig &base) {
  std::vector<NamedTensor> raw = ReadSafetensors(path);
  Checkpoint ck;
  std::vector<std::string> unmapped;
  for (NamedTensor &t : raw) {
    std::string local = MapAsteroidName(t.name);
    if (local.empty()) {
      unmapped.push_back(t.name);
      continue;
    }
    t.name = std::move(local);
    while (t.shape.size() > 1 && t.shape.back() == 1) t.shape.pop_back();
    // Asteroid stores the bases as [N, 1, L]
    if ((t.name == "encoder.basis" || t.name == "decoder.basis") && t.shape.size() == 3 &&
        t.shape[1] == 1) {
      t.shape = {t.shape[0], t.shape[2]};
    }
    if (t.name.ends_with("depthwise.weight") && t.shape.size() == 3 && t.shape[1] == 1) {
      t.shape = {t.shape[0], t.shape[2]};
    }
    ck.tensors.push_back(std::move(t));
  }
  if (!unmapped.empty()) {
    std::string msg = "unmapped tensors in " + path.string() + ":";
    for (const std::string &s : unmapped) msg += "\n  " + s;
    Throw(ErrorKind::kCheckpointMismatch, msg);
  }
  const auto find = [&](const std::string &name) -> const NamedTensor & {
    for (const NamedTensor &t : ck.tensors) {
      if (t.name == name) return t;
    }
    Throw(ErrorKind::kCheckpointMismatch, "missing tensor " + name);
  };
  SeparatorConfig cfg = base;
  const NamedTensor &enc = find("encoder.basis");
  const NamedTensor &bott = find("separator.bottleneck.weight");
  const NamedTensor &in0 = find("separator.blocks.0.in_conv.weight");
  const NamedTensor &dw0 = find("separator.blocks.0.depthwise.weight");
  const NamedTensor &mask = find("separator.mask_conv.weight");
  if (enc.shape.size() != 2 || bott.shape.size() != 2 || in0.shape.size() != 2 ||
      dw0.shape.size() != 2 || mask.shape.size() != 2) {
    Throw(ErrorKind::kCheckpointMismatch, "unexpected tensor ranks in " + path.string());
  }
  cfg.num_filters = static_cast<int>(enc.shape[0]);
  cfg.kernel_len = static_cast<int>(enc.shape[1]);
  cfg.bottleneck = static_cast<int>(bott.shape[0]);
  cfg.conv_channels = static_cast<int>(in0.shape[0]);
  cfg.kernel = static_cast<int>(dw0.shape[1]);
  cfg.num_sources = static_cast<int>(mask.shape[0] / enc.shape[0]);
  int blocks = 0;
  while (true) {
    const std::string key = "separator.blocks." + std::to_string(blocks) + ".in_conv.weight";
    bool found = false;
    for (const NamedTensor &t : ck.tensors) found = found || t.name == key;
    if (!found) break;
    ++blocks;
  }
  if (blocks % cfg.blocks_per_repeat != 0) {
    Throw(ErrorKind::kCheckpointMismatch,
          std::to_string(blocks) + " blocks is not a multiple of X=" +
              std::to_string(cfg.blocks_per_repeat));
  }
  cfg.repeats = blocks / cfg.blocks_per_repeat;
  cfg.Validate();
  ck.config = cfg;
  ck.metadata = {{"imported_from", path.string()}, {"format", "asteroid"}};
  return ck;
}

}  // namespace tasnet
