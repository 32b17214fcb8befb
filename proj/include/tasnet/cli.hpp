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

#include <string>
#include <vector>

#include "json.hpp"

namespace tasnet {

/// Built-in configuration every subcommand starts from.
nlohmann::json DefaultRunConfig();

/// Applies "a.b.c=value" to `config`. The key must already exist; the value
/// is parsed as JSON, as a comma-separated list, or kept as a string.
void ApplyOverride(nlohmann::json &config, const std::string &assignment);

/// Entry point of the `tasnet` executable. Returns 0 on success, 1 on a
/// runtime failure (JSON error on stderr) and 2 on a usage error.
int RunCli(int argc, const char *const *argv);
int RunCli(const std::vector<std::string> &args);

}  // namespace tasnet
