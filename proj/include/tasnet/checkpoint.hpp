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

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tasnet/model.hpp"

namespace tasnet {

nlohmann::json ToJson(const SeparatorConfig &cfg);
/// Missing keys keep the values of `base`.
SeparatorConfig SeparatorConfigFromJson(const nlohmann::json &j,
                                        const SeparatorConfig &base = SeparatorConfig{});

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<Real> values;
};

struct Checkpoint {
  SeparatorConfig config;
  std::vector<NamedTensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Layout: 8-byte magic "TASNETCK", u32 version, u64 header length, JSON
/// header {config, metadata, tensors:[{name, shape, offset}]}, then the
/// tensors as little-endian float64.
void SaveCheckpoint(const Separator &model, const std::filesystem::path &path,
                    const nlohmann::json &metadata = nlohmann::json::object());
Checkpoint ReadCheckpoint(const std::filesystem::path &path);

/// Copies tensors into `model` by name. Throws kCheckpointMismatch listing
/// every missing, unexpected or wrongly shaped tensor.
void ApplyCheckpoint(const Checkpoint &ckpt, Separator &model);
/// Separator built from the checkpoint's own configuration.
Separator LoadSeparator(const std::filesystem::path &path);

/// Reads F32/F64/F16/BF16 tensors from a safetensors file as doubles.
std::vector<NamedTensor> ReadSafetensors(const std::filesystem::path &path);

/// Local name for an Asteroid ConvTasNet state-dict key; empty if unmapped.
std::string MapAsteroidName(const std::string &name);

/// Converts an Asteroid ConvTasNet safetensors export. N, L, B, H, P, C and
/// the block count are read from tensor shapes; X, the norm kind and the
/// mask nonlinearity come from `base` (R = blocks / X). Trailing singleton
/// dimensions are squeezed.
Checkpoint ImportAsteroid(const std::filesystem::path &path,
                          const SeparatorConfig &base = SeparatorConfig::Full());

}  // namespace tasnet
