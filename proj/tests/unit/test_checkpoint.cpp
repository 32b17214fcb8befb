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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "tasnet/checkpoint.hpp"
#include "test_util.hpp"

using namespace tasnet;
using tasnet::testing::RandomWave;
using tasnet::testing::TempDir;

namespace {

// Asteroid key and on-disk shape for each local tensor.
std::map<std::string, std::pair<std::string, std::vector<std::size_t>>> AsteroidLayout(
    const Separator &m) {
  const auto &c = m.config();
  const std::size_t n = c.num_filters, l = c.kernel_len, b = c.bottleneck, h = c.conv_channels,
                    p = c.kernel, s = c.num_sources;
  std::map<std::string, std::pair<std::string, std::vector<std::size_t>>> out = {
      {"encoder.basis", {"encoder.filterbank._filters", {n, 1, l}}},
      {"decoder.basis", {"decoder.filterbank._filters", {n, 1, l}}},
      {"separator.input_norm.gamma", {"masker.bottleneck.0.gamma", {n}}},
      {"separator.input_norm.beta", {"masker.bottleneck.0.beta", {n}}},
      {"separator.bottleneck.weight", {"masker.bottleneck.1.weight", {b, n, 1}}},
      {"separator.bottleneck.bias", {"masker.bottleneck.1.bias", {b}}},
      {"separator.mask_prelu", {"masker.mask_net.0.weight", {1}}},
      {"separator.mask_conv.weight", {"masker.mask_net.1.weight", {s * n, b, 1}}},
      {"separator.mask_conv.bias", {"masker.mask_net.1.bias", {s * n}}},
  };
  for (int i = 0; i < c.num_blocks(); ++i) {
    const std::string lo = "separator.blocks." + std::to_string(i) + ".";
    const std::string as = "masker.TCN." + std::to_string(i) + ".";
    out[lo + "in_conv.weight"] = {as + "shared_block.0.weight", {h, b, 1}};
    out[lo + "in_conv.bias"] = {as + "shared_block.0.bias", {h}};
    out[lo + "prelu1"] = {as + "shared_block.1.weight", {1}};
    out[lo + "norm1.gamma"] = {as + "shared_block.2.gamma", {h}};
    out[lo + "norm1.beta"] = {as + "shared_block.2.beta", {h}};
    out[lo + "depthwise.weight"] = {as + "shared_block.3.weight", {h, 1, p}};
    out[lo + "depthwise.bias"] = {as + "shared_block.3.bias", {h}};
    out[lo + "prelu2"] = {as + "shared_block.4.weight", {1}};
    out[lo + "norm2.gamma"] = {as + "shared_block.5.gamma", {h}};
    out[lo + "norm2.beta"] = {as + "shared_block.5.beta", {h}};
    out[lo + "residual.weight"] = {as + "res_conv.weight", {b, h, 1}};
    out[lo + "residual.bias"] = {as + "res_conv.bias", {b}};
    out[lo + "skip.weight"] = {as + "skip_conv.weight", {b, h, 1}};
    out[lo + "skip.bias"] = {as + "skip_conv.bias", {b}};
  }
  return out;
}

struct RawTensor {
  std::string name;
  std::string dtype;
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> bytes;
};

void WriteSafetensors(const std::filesystem::path &path, const std::vector<RawTensor> &tensors) {
  nlohmann::json header = {{"__metadata__", {{"format", "pt"}}}};
  std::size_t offset = 0;
  for (const RawTensor &t : tensors) {
    header[t.name] = {{"dtype", t.dtype},
                      {"shape", t.shape},
                      {"data_offsets", {offset, offset + t.bytes.size()}}};
    offset += t.bytes.size();
  }
  const std::string h = header.dump();
  const std::uint64_t len = h.size();
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char *>(&len), 8);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const RawTensor &t : tensors) {
    out.write(reinterpret_cast<const char *>(t.bytes.data()),
              static_cast<std::streamsize>(t.bytes.size()));
  }
}

std::vector<std::uint8_t> AsF32(std::span<const Real> v) {
  std::vector<std::uint8_t> out(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float f = static_cast<float>(v[i]);
    std::memcpy(out.data() + 4 * i, &f, 4);
  }
  return out;
}

// Exports `m` the way an Asteroid ConvTasNet state dict would be stored.
void ExportAsteroid(const Separator &m, const std::filesystem::path &path) {
  const auto layout = AsteroidLayout(m);
  std::vector<RawTensor> tensors;
  for (std::size_t i = 0; i < m.params().num_slots(); ++i) {
    const ParamSlot &slot = m.params().slot(i);
    const auto &[name, shape] = layout.at(slot.name);
    tensors.push_back({"model." + name, "F32", shape, AsF32(m.params().tensor(i))});
  }
  WriteSafetensors(path, tensors);
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("native round trip is exact") {
  TempDir dir("ckpt");
  SeparatorConfig c = SeparatorConfig::Toy();
  c.norm = NormKind::kCumulative;
  c.mask = MaskNonlinearity::kSoftmax;
  Separator m(c);
  m.InitRandom(5);
  SaveCheckpoint(m, dir / "m.ckpt", {{"epoch", 7}});
  const Checkpoint ck = ReadCheckpoint(dir / "m.ckpt");
  CHECK(ck.config == c);
  CHECK(ck.metadata.at("epoch") == 7);
  const Separator back = LoadSeparator(dir / "m.ckpt");
  CHECK(std::equal(back.params().values().begin(), back.params().values().end(),
                   m.params().values().begin()));
  CHECK(SeparatorConfigFromJson(ToJson(c)) == c);
}

TEST_CASE("mismatched checkpoints name the offending tensors") {
  TempDir dir("ckpt_bad");
  Separator toy(SeparatorConfig::Toy());
  SaveCheckpoint(toy, dir / "toy.ckpt");
  SeparatorConfig other = SeparatorConfig::Toy();
  other.bottleneck = 16;
  other.blocks_per_repeat = 5;
  Separator target(other);
  try {
    ApplyCheckpoint(ReadCheckpoint(dir / "toy.ckpt"), target);
    FAIL("mismatch accepted");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kCheckpointMismatch);
    const std::string what = e.what();
    CHECK(what.find("separator.bottleneck.weight") != std::string::npos);
    CHECK(what.find("separator.blocks.4.in_conv.weight") != std::string::npos);
  }
  std::ofstream(dir / "junk.ckpt") << "TASNETCKgarbage";
  CHECK_THROWS_AS(ReadCheckpoint(dir / "junk.ckpt"), Error);
}

TEST_CASE("Asteroid names") {
  Separator m(SeparatorConfig::Toy());
  for (const auto &[local, asteroid] : AsteroidLayout(m)) {
    CHECK(MapAsteroidName(asteroid.first) == local);
    CHECK(MapAsteroidName("model." + asteroid.first) == local);
  }
  CHECK(MapAsteroidName("masker.TCN.0.unknown") == "");
  CHECK(MapAsteroidName("optimizer.state") == "");
}

TEST_CASE("Asteroid safetensors import") {
  TempDir dir("asteroid");
  SeparatorConfig c = SeparatorConfig::Toy();
  c.repeats = 2;
  Separator m(c);
  m.InitRandom(8);
  ExportAsteroid(m, dir / "model.safetensors");
  SeparatorConfig base = SeparatorConfig::Full();
  base.blocks_per_repeat = 4;
  const Checkpoint ck = ImportAsteroid(dir / "model.safetensors", base);
  CHECK(ck.config == c);
  Separator imported(ck.config);
  ApplyCheckpoint(ck, imported);
  for (std::size_t i = 0; i < m.NumParameters(); ++i) {
    CHECK(imported.params().values()[i] == static_cast<float>(m.params().values()[i]));
  }
  std::mt19937_64 rng(1);
  const Waveform x = RandomWave(1600, rng);
  const auto a = m.Forward(x), b = imported.Forward(x);
  for (std::size_t i = 0; i < x.size(); i += 53) {
    CHECK(b.estimates[0].samples[i] == doctest::Approx(a.estimates[0].samples[i]).epsilon(1e-4));
  }
}

TEST_CASE("Asteroid import rejects unknown tensors") {
  TempDir dir("asteroid_bad");
  Separator m(SeparatorConfig::Toy());
  ExportAsteroid(m, dir / "ok.safetensors");
  std::vector<RawTensor> extra{{"model.masker.extra", "F32", {1}, AsF32(std::vector<Real>{1.0})}};
  WriteSafetensors(dir / "bad.safetensors", extra);
  CHECK_THROWS_AS(ImportAsteroid(dir / "bad.safetensors"), Error);
}

TEST_CASE("safetensors dtypes") {
  TempDir dir("dtypes");
  const auto u16 = [](std::initializer_list<std::uint16_t> v) {
    std::vector<std::uint8_t> out;
    for (std::uint16_t x : v) {
      out.push_back(static_cast<std::uint8_t>(x & 0xff));
      out.push_back(static_cast<std::uint8_t>(x >> 8));
    }
    return out;
  };
  std::vector<std::uint8_t> f64(16);
  const double d[2] = {0.25, -3.5};
  std::memcpy(f64.data(), d, 16);
  WriteSafetensors(dir / "t.safetensors",
                   {{"half", "F16", {3}, u16({0x3C00, 0xC000, 0x3800})},
                    {"brain", "BF16", {2}, u16({0x3F80, 0xC040})},
                    {"double", "F64", {2}, f64}});
  const auto t = ReadSafetensors(dir / "t.safetensors");
  std::map<std::string, std::vector<Real>> byname;
  for (const auto &x : t) byname[x.name] = x.values;
  CHECK(byname["half"] == std::vector<Real>{1.0, -2.0, 0.5});
  CHECK(byname["brain"] == std::vector<Real>{1.0, -3.0});
  CHECK(byname["double"] == std::vector<Real>{0.25, -3.5});
}

}  // TEST_SUITE
