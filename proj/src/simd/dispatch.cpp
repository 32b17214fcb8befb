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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "tasnet/simd/kernels.hpp"

namespace tasnet::simd {

#if defined(TASNET_HAVE_AVX2)
const KernelTable &Avx2KernelTable();
#endif
#if defined(TASNET_HAVE_NEON)
const KernelTable &NeonKernelTable();
#endif

const KernelTable *Avx2Kernels() {
#if defined(TASNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &Avx2KernelTable() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable *NeonKernels() {
#if defined(TASNET_HAVE_NEON)
  return &NeonKernelTable();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable *> AvailableKernels() {
  std::vector<const KernelTable *> tables{&ScalarKernels()};
  if (const auto *t = Avx2Kernels()) tables.push_back(t);
  if (const auto *t = NeonKernels()) tables.push_back(t);
  return tables;
}

namespace {

const KernelTable *Lookup(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return &ScalarKernels();
    case Isa::kAvx2: return Avx2Kernels();
    case Isa::kNeon: return NeonKernels();
  }
  return nullptr;
}

const KernelTable *ChooseAtStartup() {
  if (const char *env = std::getenv("TASNET_SIMD")) {
    const std::string_view want(env);
    for (const auto *t : AvailableKernels()) {
      if (t->name == want) return t;
    }
  }
  if (const auto *t = Avx2Kernels()) return t;
  if (const auto *t = NeonKernels()) return t;
  return &ScalarKernels();
}

std::atomic<const KernelTable *> &Slot() {
  static std::atomic<const KernelTable *> active{ChooseAtStartup()};
  return active;
}

}  // namespace

const KernelTable &Active() { return *Slot().load(std::memory_order_relaxed); }

bool SetActive(Isa isa) {
  const KernelTable *t = Lookup(isa);
  if (t == nullptr) return false;
  Slot().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace tasnet::simd
