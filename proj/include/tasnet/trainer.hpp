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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tasnet/corpus.hpp"
#include "tasnet/embeddings.hpp"
#include "tasnet/model.hpp"

namespace tasnet {

struct TrainConfig {
  int max_epochs = 200;
  int patience = 30;             // epochs without validation improvement
  Real learning_rate = 1e-3;
  int batch_size = 4;
  std::string init = "scratch";  // "scratch" or "transfer"
  std::string checkpoint;        // transfer source (.ckpt or Asteroid .safetensors)
  SimilarityConfig similarity;   // weight_sl == 0 is the baseline loss
  std::string embedder_command;  // for external embedding backends
  std::uint64_t seed = 0;
  Real clip_norm = 5.0;
  int plateau_epochs = 3;        // halve the rate after this many flat epochs
  Real lr_decay = 0.5;
  long max_steps = 0;            // 0: no step limit

  void Validate() const;
};

nlohmann::json ToJson(const TrainConfig &cfg);
TrainConfig TrainConfigFromJson(const nlohmann::json &j, const TrainConfig &base = {});

struct EpochRecord {
  int epoch = 0;  // 1-based
  Real train_loss = 0.0;
  Real validation_si_sdr = 0.0;
  Real learning_rate = 0.0;
  long steps = 0;  // cumulative optimizer steps
  Real seconds = 0.0;
};

struct TrainRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  Real best_validation_si_sdr = 0.0;
  bool stopped_early = false;
  long steps = 0;

  nlohmann::json ToJson() const;
  static TrainRecord FromJson(const nlohmann::json &j);
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::size_t size, Real learning_rate, Real beta1 = 0.9, Real beta2 = 0.999,
       Real epsilon = 1e-8);
  void Step(std::span<Real> params, std::span<const Real> grad);
  Real learning_rate() const { return lr_; }
  void set_learning_rate(Real lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  Real lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Real> m_, v_;
};

/// Scales `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
Real ClipGradNorm(std::span<Real> grad, Real max_norm);

struct StepInfo {
  int epoch = 0;
  long step = 0;
  Real loss = 0.0;  // mean over the batch
};

struct TrainHooks {
  /// Called after every optimizer step; returning true stops training.
  std::function<bool(const StepInfo &, const Separator &)> on_step;
  std::function<void(const EpochRecord &)> on_epoch;
};

struct TrainResult {
  Separator model;  // best-validation parameters
  TrainRecord record;
};

/// Runs epochs until max_epochs, the patience budget, max_steps or a hook
/// stops it. Non-finite losses raise kDivergence naming the epoch and batch.
/// With a non-empty `out_dir` writes train_log.jsonl, best.ckpt and
/// train_record.json there.
TrainResult Train(std::span<const MixtureTriple> train, std::span<const MixtureTriple> validation,
                  const SeparatorConfig &model_cfg, const TrainConfig &cfg,
                  const std::filesystem::path &out_dir = {}, const TrainHooks &hooks = {});
TrainResult Train(const SplitManifest &manifest, const SeparatorConfig &model_cfg,
                  const TrainConfig &cfg, const std::filesystem::path &out_dir = {},
                  const TrainHooks &hooks = {});

std::vector<MixtureTriple> LoadSplit(const SplitManifest &manifest, std::string_view split);

/// Separator ready for training: random init, or weights from cfg.checkpoint.
Separator InitialModel(const SeparatorConfig &model_cfg, const TrainConfig &cfg);

/// Mean best-permutation SI-SDR over `triples`.
Real ValidationSiSdr(const Separator &model, std::span<const MixtureTriple> triples);

struct EvalRow {
  std::string sample_id;
  Real si_sdr_s1 = 0.0;  // estimate matched to source 1
  Real si_sdr_s2 = 0.0;
  Real si_sdri = 0.0;
  std::vector<int> permutation;
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  Real mean_si_sdr = 0.0;
  Real mean_si_sdri = 0.0;
};

/// Throws kEmptySplit for an empty list.
EvalSummary Evaluate(const Separator &model, std::span<const MixtureTriple> triples);
/// Columns: sample_id, si_sdr_s1, si_sdr_s2, si_sdri, permutation.
void WriteEvalCsv(const std::filesystem::path &path, const EvalSummary &summary);

struct SweepCell {
  Real weight_sl = 0.0;
  int layer = 0;
  bool ok = false;
  std::string error;
  TrainRecord record;
};

struct SweepConfig {
  std::vector<Real> weights{5, 10, 20};
  std::vector<int> layers{1, 2, 3, 4, 12};
  std::string backend = "stub";  // "stub" or "transformer"
};

/// One training run per (weight, layer). Finished cells are stored under
/// out_dir/cells and reused on a rerun. Writes out_dir/sweep_results.csv
/// (weight_sl, layer, best_si_sdr, best_epoch) sorted by best_si_sdr,
/// failed cells last.
std::vector<SweepCell> Sweep(std::span<const MixtureTriple> train,
                             std::span<const MixtureTriple> validation,
                             const SeparatorConfig &model_cfg, const TrainConfig &base,
                             const SweepConfig &grid, const std::filesystem::path &out_dir);

std::string CellDescriptor(const SweepConfig &grid, int layer, std::uint64_t seed);

}  // namespace tasnet
