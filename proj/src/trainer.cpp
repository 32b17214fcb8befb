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

#include "tasnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "tasnet/checkpoint.hpp"
#include "tasnet/metrics.hpp"

namespace tasnet {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::Validate() const {
  if (max_epochs < 1) Throw(ErrorKind::kInvalidArgument, "max_epochs must be >= 1");
  if (patience < 1) Throw(ErrorKind::kInvalidArgument, "patience must be >= 1");
  if (!(learning_rate > 0.0)) Throw(ErrorKind::kInvalidArgument, "learning_rate must be > 0");
  if (batch_size < 1) Throw(ErrorKind::kInvalidArgument, "batch_size must be >= 1");
  if (init != "scratch" && init != "transfer") {
    Throw(ErrorKind::kInvalidArgument, "init must be 'scratch' or 'transfer'");
  }
  if (init == "transfer" && checkpoint.empty()) {
    Throw(ErrorKind::kInvalidArgument, "transfer init needs a checkpoint");
  }
  if (!(clip_norm > 0.0)) Throw(ErrorKind::kInvalidArgument, "clip_norm must be > 0");
  if (plateau_epochs < 1 || !(lr_decay > 0.0 && lr_decay <= 1.0)) {
    Throw(ErrorKind::kInvalidArgument, "bad learning-rate schedule");
  }
  if (max_steps < 0) Throw(ErrorKind::kInvalidArgument, "max_steps must be >= 0");
  similarity.Validate();
}

json ToJson(const TrainConfig &c) {
  return {{"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"init", c.init},
          {"checkpoint", c.checkpoint},
          {"weight_sl", c.similarity.weight_sl},
          {"epsilon", c.similarity.epsilon},
          {"clamp_epsilon", c.similarity.clamp_epsilon},
          {"backend", c.similarity.backend},
          {"embedder_command", c.embedder_command},
          {"seed", c.seed},
          {"clip_norm", c.clip_norm},
          {"plateau_epochs", c.plateau_epochs},
          {"lr_decay", c.lr_decay},
          {"max_steps", c.max_steps}};
}

TrainConfig TrainConfigFromJson(const json &j, const TrainConfig &base) {
  TrainConfig c = base;
  try {
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.init = j.value("init", c.init);
    c.checkpoint = j.value("checkpoint", c.checkpoint);
    c.similarity.weight_sl = j.value("weight_sl", c.similarity.weight_sl);
    c.similarity.epsilon = j.value("epsilon", c.similarity.epsilon);
    c.similarity.clamp_epsilon = j.value("clamp_epsilon", c.similarity.clamp_epsilon);
    c.similarity.backend = j.value("backend", c.similarity.backend);
    c.embedder_command = j.value("embedder_command", c.embedder_command);
    c.seed = j.value("seed", c.seed);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.plateau_epochs = j.value("plateau_epochs", c.plateau_epochs);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.max_steps = j.value("max_steps", c.max_steps);
  } catch (const json::exception &e) {
    Throw(ErrorKind::kInvalidArgument, std::string("bad training config: ") + e.what());
  }
  c.Validate();
  return c;
}

json TrainRecord::ToJson() const {
  json ep = json::array();
  for (const EpochRecord &e : epochs) {
    ep.push_back({{"epoch", e.epoch},
                  {"train_loss", e.train_loss},
                  {"validation_si_sdr", e.validation_si_sdr},
                  {"learning_rate", e.learning_rate},
                  {"steps", e.steps},
                  {"seconds", e.seconds}});
  }
  return {{"epochs", ep},
          {"best_epoch", best_epoch},
          {"best_validation_si_sdr", best_validation_si_sdr},
          {"stopped_early", stopped_early},
          {"steps", steps}};
}

TrainRecord TrainRecord::FromJson(const json &j) {
  TrainRecord r;
  for (const json &e : j.at("epochs")) {
    EpochRecord x;
    x.epoch = e.at("epoch").get<int>();
    x.train_loss = e.at("train_loss").get<Real>();
    x.validation_si_sdr = e.at("validation_si_sdr").get<Real>();
    x.learning_rate = e.at("learning_rate").get<Real>();
    x.steps = e.at("steps").get<long>();
    x.seconds = e.value("seconds", 0.0);
    r.epochs.push_back(x);
  }
  r.best_epoch = j.at("best_epoch").get<int>();
  r.best_validation_si_sdr = j.at("best_validation_si_sdr").get<Real>();
  r.stopped_early = j.value("stopped_early", false);
  r.steps = j.value("steps", 0L);
  return r;
}

Adam::Adam(std::size_t size, Real learning_rate, Real beta1, Real beta2, Real epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0),
      v_(size, 0.0) {}

void Adam::Step(std::span<Real> params, std::span<const Real> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    Throw(ErrorKind::kShape, "optimizer state does not match the parameters");
  }
  ++t_;
  const Real c1 = 1.0 - std::pow(beta1_, static_cast<Real>(t_));
  const Real c2 = 1.0 - std::pow(beta2_, static_cast<Real>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

Real ClipGradNorm(std::span<Real> grad, Real max_norm) {
  const Real norm = std::sqrt(Dot(grad, grad));
  if (norm > max_norm) {
    const Real scale = max_norm / norm;
    for (Real &g : grad) g *= scale;
  }
  return norm;
}

std::vector<MixtureTriple> LoadSplit(const SplitManifest &manifest, std::string_view split) {
  std::vector<MixtureTriple> out;
  for (const TripleRef &r : manifest.split(split)) out.push_back(LoadTriple(manifest, r));
  return out;
}

Separator InitialModel(const SeparatorConfig &model_cfg, const TrainConfig &cfg) {
  Separator model(model_cfg);
  model.InitRandom(cfg.seed);
  if (cfg.init == "transfer") {
    const fs::path src = cfg.checkpoint;
    const Checkpoint ck = src.extension() == ".safetensors" ? ImportAsteroid(src, model_cfg)
                                                            : ReadCheckpoint(src);
    ApplyCheckpoint(ck, model);
  }
  return model;
}

namespace {

SeparatedSources Separate(const Separator &model, const MixtureTriple &t) {
  return model.Forward(t.mixture);
}

}  // namespace

Real ValidationSiSdr(const Separator &model, std::span<const MixtureTriple> triples) {
  if (triples.empty()) Throw(ErrorKind::kEmptySplit, "validation split is empty");
  Real sum = 0.0;
  for (const MixtureTriple &t : triples) {
    const Waveform refs[2] = {t.source1, t.source2};
    sum += -PitLoss(Separate(model, t), refs).loss;
  }
  return sum / static_cast<Real>(triples.size());
}

EvalSummary Evaluate(const Separator &model, std::span<const MixtureTriple> triples) {
  if (triples.empty()) Throw(ErrorKind::kEmptySplit, "evaluation split is empty");
  EvalSummary s;
  for (const MixtureTriple &t : triples) {
    const Waveform refs[2] = {t.source1, t.source2};
    const SeparatedSources est = Separate(model, t);
    const PitResult pit = PitLoss(est, refs);
    EvalRow row;
    row.sample_id = t.sample_id();
    row.permutation = pit.permutation;
    for (std::size_t i = 0; i < 2; ++i) {
      const Real v = pit.si_snr[i];
      (pit.permutation[i] == 0 ? row.si_sdr_s1 : row.si_sdr_s2) = v;
    }
    row.si_sdri = SiSdrImprovement(t.mixture, est, refs);
    s.mean_si_sdr += -pit.loss;
    s.mean_si_sdri += row.si_sdri;
    s.rows.push_back(std::move(row));
  }
  s.mean_si_sdr /= static_cast<Real>(triples.size());
  s.mean_si_sdri /= static_cast<Real>(triples.size());
  return s;
}

void WriteEvalCsv(const fs::path &path, const EvalSummary &summary) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "sample_id,si_sdr_s1,si_sdr_s2,si_sdri,permutation\n";
  char buf[128];
  for (const EvalRow &r : summary.rows) {
    std::string perm;
    for (std::size_t i = 0; i < r.permutation.size(); ++i) {
      if (i) perm += '-';
      perm += std::to_string(r.permutation[i]);
    }
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f", r.si_sdr_s1, r.si_sdr_s2, r.si_sdri);
    out << r.sample_id << ',' << buf << ',' << perm << '\n';
  }
  if (!out) Throw(ErrorKind::kIo, "cannot write " + path.string());
}

TrainResult Train(std::span<const MixtureTriple> train, std::span<const MixtureTriple> validation,
                  const SeparatorConfig &model_cfg, const TrainConfig &cfg,
                  const fs::path &out_dir, const TrainHooks &hooks) {
  cfg.Validate();
  if (train.empty()) Throw(ErrorKind::kEmptySplit, "training split is empty");
  if (validation.empty()) Throw(ErrorKind::kEmptySplit, "validation split is empty");

  Separator model = InitialModel(model_cfg, cfg);
  std::unique_ptr<EmbeddingBackend> backend;
  if (cfg.similarity.weight_sl > 0.0) {
    backend = MakeBackend(cfg.similarity.backend, cfg.embedder_command);
  }

  std::ofstream log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    log.open(out_dir / "train_log.jsonl", std::ios::trunc);
  }

  const std::size_t n_params = model.NumParameters();
  Adam adam(n_params, cfg.learning_rate);
  std::vector<Real> grad(n_params);
  std::vector<Real> best_params(model.params().values().begin(), model.params().values().end());
  TrainRecord record;
  record.best_validation_si_sdr = -std::numeric_limits<Real>::infinity();
  int since_best = 0, since_plateau = 0;
  bool stop = false;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    Real loss_sum = 0.0;
    std::size_t loss_count = 0;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0, batch = 0; start < order.size() && !stop; start += bs, ++batch) {
      const std::size_t end = std::min(order.size(), start + bs);
      const Real inv = 1.0 / static_cast<Real>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      Real batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const MixtureTriple &t = train[order[k]];
        const Waveform refs[2] = {t.source1, t.source2};
        const ForwardTrace trace = model.ForwardWithTrace(t.mixture);
        std::vector<std::vector<Real>> d;
        const CompositeLossResult loss =
            CompositeLoss(trace.output, refs, cfg.similarity, backend.get(), &d);
        if (!std::isfinite(loss.total)) {
          Throw(ErrorKind::kDivergence, "non-finite loss at epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(batch));
        }
        for (auto &v : d) {
          for (Real &x : v) x *= inv;
        }
        model.Backward(trace, d, grad);
        batch_loss += loss.total * inv;
      }
      for (Real g : grad) {
        if (!std::isfinite(g)) {
          Throw(ErrorKind::kDivergence, "non-finite gradient at epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(batch));
        }
      }
      ClipGradNorm(grad, cfg.clip_norm);
      adam.Step(model.params().values(), grad);
      loss_sum += batch_loss * static_cast<Real>(end - start);
      loss_count += end - start;
      if (hooks.on_step && hooks.on_step({epoch, adam.steps(), batch_loss}, model)) stop = true;
      if (cfg.max_steps > 0 && adam.steps() >= cfg.max_steps) stop = true;
    }

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = loss_sum / static_cast<Real>(loss_count);
    er.validation_si_sdr = ValidationSiSdr(model, validation);
    er.learning_rate = adam.learning_rate();
    er.steps = adam.steps();
    er.seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
    record.epochs.push_back(er);

    if (er.validation_si_sdr > record.best_validation_si_sdr) {
      record.best_validation_si_sdr = er.validation_si_sdr;
      record.best_epoch = epoch;
      std::copy(model.params().values().begin(), model.params().values().end(),
                best_params.begin());
      since_best = 0;
      since_plateau = 0;
      if (!out_dir.empty()) {
        SaveCheckpoint(model, out_dir / "best.ckpt",
                       {{"epoch", epoch}, {"validation_si_sdr", er.validation_si_sdr}});
      }
    } else {
      ++since_best;
      if (++since_plateau >= cfg.plateau_epochs) {
        adam.set_learning_rate(adam.learning_rate() * cfg.lr_decay);
        since_plateau = 0;
      }
    }
    if (log.is_open()) {
      log << json{{"epoch", er.epoch},
                  {"train_loss", er.train_loss},
                  {"validation_si_sdr", er.validation_si_sdr},
                  {"learning_rate", er.learning_rate},
                  {"steps", er.steps},
                  {"seconds", er.seconds}}
                 .dump()
          << "\n";
      log.flush();
    }
    if (hooks.on_epoch) hooks.on_epoch(er);
    if (since_best >= cfg.patience) {
      record.stopped_early = true;
      stop = true;
    }
  }
  record.steps = adam.steps();
  std::copy(best_params.begin(), best_params.end(), model.params().values().begin());
  if (!out_dir.empty()) {
    std::ofstream(out_dir / "train_record.json") << record.ToJson().dump(2) << "\n";
  }
  return {std::move(model), std::move(record)};
}

TrainResult Train(const SplitManifest &manifest, const SeparatorConfig &model_cfg,
                  const TrainConfig &cfg, const fs::path &out_dir, const TrainHooks &hooks) {
  const std::vector<MixtureTriple> train = LoadSplit(manifest, "train");
  const std::vector<MixtureTriple> val = LoadSplit(manifest, "validation");
  return Train(train, val, model_cfg, cfg, out_dir, hooks);
}

std::string CellDescriptor(const SweepConfig &grid, int layer, std::uint64_t seed) {
  if (grid.backend == "stub") {
    return "stub:seed=" + std::to_string(seed) + ",layer=" + std::to_string(layer);
  }
  if (grid.backend == "transformer") return "transformer:layer=" + std::to_string(layer);
  if (grid.backend == "tdnn") return "tdnn";
  Throw(ErrorKind::kInvalidArgument, "unknown sweep backend: " + grid.backend);
}

namespace {

std::string CellName(Real weight, int layer) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "w%g_l%d", weight, layer);
  return buf;
}

}  // namespace

std::vector<SweepCell> Sweep(std::span<const MixtureTriple> train,
                             std::span<const MixtureTriple> validation,
                             const SeparatorConfig &model_cfg, const TrainConfig &base,
                             const SweepConfig &grid, const fs::path &out_dir) {
  if (grid.weights.empty() || grid.layers.empty()) {
    Throw(ErrorKind::kInvalidArgument, "sweep grid is empty");
  }
  const fs::path cells_dir = out_dir / "cells";
  fs::create_directories(cells_dir);
  std::vector<SweepCell> cells;
  for (Real w : grid.weights) {
    for (int layer : grid.layers) {
      const std::string name = CellName(w, layer);
      const fs::path cell_file = cells_dir / (name + ".json");
      SweepCell cell;
      cell.weight_sl = w;
      cell.layer = layer;
      if (fs::exists(cell_file)) {
        std::ifstream in(cell_file);
        const json j = json::parse(in);
        cell.ok = j.at("ok").get<bool>();
        cell.error = j.value("error", "");
        if (cell.ok) cell.record = TrainRecord::FromJson(j.at("record"));
        cells.push_back(std::move(cell));
        continue;
      }
      TrainConfig cfg = base;
      cfg.similarity.weight_sl = w;
      try {
        cfg.similarity.backend = CellDescriptor(grid, layer, base.seed);
        cell.record = Train(train, validation, model_cfg, cfg, out_dir / name).record;
        cell.ok = true;
      } catch (const Error &e) {
        cell.ok = false;
        cell.error = std::string(ToString(e.kind())) + ": " + e.what();
      }
      json j = {{"weight_sl", w}, {"layer", layer}, {"ok", cell.ok}};
      if (cell.ok) {
        j["record"] = cell.record.ToJson();
      } else {
        j["error"] = cell.error;
      }
      const fs::path tmp = cell_file.string() + ".tmp";
      std::ofstream(tmp) << j.dump(2) << "\n";
      fs::rename(tmp, cell_file);
      cells.push_back(std::move(cell));
    }
  }

  std::vector<const SweepCell *> sorted;
  for (const SweepCell &c : cells) sorted.push_back(&c);
  std::stable_sort(sorted.begin(), sorted.end(), [](const SweepCell *a, const SweepCell *b) {
    if (a->ok != b->ok) return a->ok;
    return a->ok && a->record.best_validation_si_sdr > b->record.best_validation_si_sdr;
  });
  std::ofstream csv(out_dir / "sweep_results.csv");
  csv << "weight_sl,layer,best_si_sdr,best_epoch\n";
  char buf[128];
  for (const SweepCell *c : sorted) {
    if (c->ok) {
      std::snprintf(buf, sizeof(buf), "%g,%d,%.4f,%d", c->weight_sl, c->layer,
                    c->record.best_validation_si_sdr, c->record.best_epoch);
    } else {
      std::snprintf(buf, sizeof(buf), "%g,%d,nan,-1", c->weight_sl, c->layer);
    }
    csv << buf << '\n';
  }
  if (!csv) Throw(ErrorKind::kIo, "cannot write sweep results");
  return cells;
}

}  // namespace tasnet
