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

#include "tasnet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "tasnet/audio_io.hpp"
#include "tasnet/checkpoint.hpp"
#include "tasnet/corpus.hpp"
#include "tasnet/embeddings.hpp"
#include "tasnet/streaming.hpp"
#include "tasnet/trainer.hpp"

namespace tasnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

json DefaultRunConfig() {
  return {
      {"seed", 42},
      {"out_dir", "out"},
      {"model",
       {{"preset", "toy"},
        {"checkpoint", ""},
        {"num_filters", nullptr},
        {"kernel_len", nullptr},
        {"bottleneck", nullptr},
        {"conv_channels", nullptr},
        {"kernel", nullptr},
        {"blocks_per_repeat", nullptr},
        {"repeats", nullptr},
        {"num_sources", nullptr},
        {"mask", nullptr},
        {"norm", nullptr}}},
      {"data",
       {{"corpus_dir", ""},
        {"manifest", ""},
        {"fractions", {0.7, 0.2, 0.1}},
        {"segment_seconds", 30.0},
        {"sample_rate", 8000},
        {"split", "test"},
        {"n_samples", 0}}},
      {"synth", {{"count", 20}, {"seconds", 30.0}, {"rms", 0.05}, {"intermittent", true}}},
      {"similarity",
       {{"weight_sl", 0.0},
        {"backend", "stub:seed=0"},
        {"embedder_command", ""},
        {"epsilon", 1e-8},
        {"clamp_epsilon", 1e-8}}},
      {"train",
       {{"max_epochs", 200},
        {"patience", 30},
        {"learning_rate", 1e-3},
        {"batch_size", 4},
        {"init", "scratch"},
        {"checkpoint", ""},
        {"clip_norm", 5.0},
        {"plateau_epochs", 3},
        {"lr_decay", 0.5},
        {"max_steps", 0}}},
      {"sweep", {{"weights", {5, 10, 20}}, {"layers", {1, 2, 3, 4, 12}}, {"backend", "stub"}}},
      {"stream",
       {{"segment_len", 2.0},
        {"threshold", 1.0},
        {"threaded", false},
        {"match_gain", true},
        {"queue_capacity", 4},
        {"lengths", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 25, 30}}}},
  };
}

namespace {

json ParseScalar(const std::string &text) {
  try {
    return json::parse(text);
  } catch (const json::exception &) {
    return text;
  }
}

json ParseValue(const std::string &text) {
  if (!text.empty() && text.front() != '[' && text.find(',') != std::string::npos) {
    json arr = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) arr.push_back(ParseScalar(item));
    return arr;
  }
  return ParseScalar(text);
}

// Fits `value` to the type already stored under `key`.
json Coerce(const json &current, json value, const std::string &key) {
  if (current.is_null()) return value;
  if (current.is_string()) return value.is_string() ? value : json(value.dump());
  if (current.is_array() && !value.is_array()) return json::array({value});
  if (current.is_number() && !value.is_number()) {
    throw UsageError(key + " expects a number");
  }
  if (current.is_boolean() && !value.is_boolean()) throw UsageError(key + " expects true/false");
  return value;
}

void MergeChecked(json &dst, const json &src, const std::string &prefix) {
  if (!src.is_object()) throw UsageError("config " + (prefix.empty() ? "root" : prefix) +
                                         " must be an object");
  for (const auto &[key, value] : src.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!dst.contains(key)) throw UsageError("unknown config key: " + path);
    if (dst[key].is_object()) {
      MergeChecked(dst[key], value, path);
    } else {
      dst[key] = Coerce(dst[key], value, path);
    }
  }
}

}  // namespace

void ApplyOverride(json &config, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("override must look like key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  json *node = &config;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) {
      throw UsageError("unknown config key: " + key);
    }
    node = &(*node)[part];
  }
  if (node->is_object()) throw UsageError(key + " is a section, not a value");
  *node = Coerce(*node, ParseValue(assignment.substr(eq + 1)), key);
}

namespace {

// -- helpers shared by the subcommands --------------------------------------

SeparatorConfig ModelConfig(const json &cfg) {
  const json &m = cfg.at("model");
  const std::string preset = m.at("preset").get<std::string>();
  SeparatorConfig base;
  if (preset == "toy") {
    base = SeparatorConfig::Toy();
  } else if (preset == "full") {
    base = SeparatorConfig::Full();
  } else {
    throw UsageError("model.preset must be 'toy' or 'full'");
  }
  json fields = json::object();
  for (const auto &[k, v] : m.items()) {
    if (k != "preset" && k != "checkpoint" && !v.is_null()) fields[k] = v;
  }
  return SeparatorConfigFromJson(fields, base);
}

TrainConfig TrainSettings(const json &cfg) {
  json t = cfg.at("train");
  const json &s = cfg.at("similarity");
  for (const char *k : {"weight_sl", "backend", "embedder_command", "epsilon", "clamp_epsilon"}) {
    t[k] = s.at(k);
  }
  t["seed"] = cfg.at("seed");
  return TrainConfigFromJson(t);
}

std::string Str(const json &cfg, const char *section, const char *key) {
  return cfg.at(section).at(key).get<std::string>();
}

std::string Required(const json &cfg, const char *section, const char *key) {
  std::string v = Str(cfg, section, key);
  if (v.empty()) throw UsageError(std::string(section) + "." + key + " is required");
  return v;
}

SplitManifest Manifest(const json &cfg) { return LoadManifest(Required(cfg, "data", "manifest")); }

std::vector<MixtureTriple> Samples(const json &cfg, const SplitManifest &manifest) {
  std::vector<MixtureTriple> all = LoadSplit(manifest, Str(cfg, "data", "split"));
  const std::size_t n = cfg.at("data").at("n_samples").get<std::size_t>();
  if (n > 0 && all.size() > n) all.resize(n);
  if (all.empty()) Throw(ErrorKind::kEmptySplit, "no samples in split " + Str(cfg, "data", "split"));
  return all;
}

Separator TrainedModel(const json &cfg) {
  const fs::path ck = Required(cfg, "model", "checkpoint");
  if (ck.extension() == ".safetensors") {
    const Checkpoint c = ImportAsteroid(ck, ModelConfig(cfg));
    Separator m(c.config);
    ApplyCheckpoint(c, m);
    return m;
  }
  return LoadSeparator(ck);
}

std::unique_ptr<EmbeddingBackend> Backend(const json &cfg) {
  return MakeBackend(Str(cfg, "similarity", "backend"), Str(cfg, "similarity", "embedder_command"));
}

void WriteJson(const fs::path &path, const json &j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) Throw(ErrorKind::kIo, "cannot write " + path.string());
}

// -- subcommands ---------------------------------------------------------------

json CmdPrepareData(const json &cfg, const fs::path &out) {
  const json &d = cfg.at("data");
  PrepareOptions opts;
  opts.fractions = d.at("fractions").get<std::array<Real, 3>>();
  opts.seed = cfg.at("seed").get<std::uint64_t>();
  opts.segment_seconds = d.at("segment_seconds").get<Real>();
  opts.sample_rate = d.at("sample_rate").get<int>();
  const SplitManifest m = PrepareCorpus(Required(cfg, "data", "corpus_dir"), out, opts);
  return {{"manifest", (out / "manifest.json").string()},
          {"train", m.train.size()},
          {"validation", m.validation.size()},
          {"test", m.test.size()}};
}

json CmdSynthCorpus(const json &cfg, const fs::path &out) {
  const json &s = cfg.at("synth");
  SyntheticOptions opts;
  opts.seed = cfg.at("seed").get<std::uint64_t>();
  opts.seconds = s.at("seconds").get<Real>();
  opts.rms = s.at("rms").get<Real>();
  opts.intermittent = s.at("intermittent").get<bool>();
  opts.sample_rate = cfg.at("data").at("sample_rate").get<int>();
  const std::size_t count = s.at("count").get<std::size_t>();
  WriteSyntheticCorpus(out, opts, count);
  return {{"corpus_dir", out.string()}, {"calls", count}};
}

json CmdSimilarityReport(const json &cfg, const fs::path &out) {
  const SplitManifest m = Manifest(cfg);
  const auto backend = Backend(cfg);
  const std::vector<MixtureTriple> samples = Samples(cfg, m);
  const auto rows = SimilarityReport(samples, *backend);
  WriteSimilarityCsv(out / "similarity.csv", rows, *backend);
  Real mean = 0.0;
  for (const auto &r : rows) mean += r.css;
  return {{"rows", rows.size()}, {"mean_css", rows.empty() ? 0.0 : mean / rows.size()}};
}

json CmdTrain(const json &cfg, const fs::path &out) {
  const SplitManifest m = Manifest(cfg);
  const TrainResult r = Train(m, ModelConfig(cfg), TrainSettings(cfg), out);
  return {{"best_epoch", r.record.best_epoch},
          {"best_validation_si_sdr", r.record.best_validation_si_sdr},
          {"epochs", r.record.epochs.size()},
          {"checkpoint", (out / "best.ckpt").string()}};
}

json CmdSweep(const json &cfg, const fs::path &out) {
  const SplitManifest m = Manifest(cfg);
  SweepConfig grid;
  grid.weights = cfg.at("sweep").at("weights").get<std::vector<Real>>();
  grid.layers = cfg.at("sweep").at("layers").get<std::vector<int>>();
  grid.backend = Str(cfg, "sweep", "backend");
  const auto train = LoadSplit(m, "train");
  const auto val = LoadSplit(m, "validation");
  const auto cells = Sweep(train, val, ModelConfig(cfg), TrainSettings(cfg), grid, out);
  std::size_t failed = 0;
  for (const auto &c : cells) failed += c.ok ? 0 : 1;
  return {{"cells", cells.size()}, {"failed", failed},
          {"results", (out / "sweep_results.csv").string()}};
}

json CmdEvaluate(const json &cfg, const fs::path &out) {
  const SplitManifest m = Manifest(cfg);
  const Separator model = TrainedModel(cfg);
  const EvalSummary s = Evaluate(model, Samples(cfg, m));
  WriteEvalCsv(out / "metrics.csv", s);
  const json summary = {{"samples", s.rows.size()},
                        {"mean_si_sdr", s.mean_si_sdr},
                        {"mean_si_sdri", s.mean_si_sdri}};
  WriteJson(out / "evaluation.json", summary);
  return summary;
}

StreamConfig StreamSettings(const json &cfg) {
  const json &s = cfg.at("stream");
  StreamConfig c;
  c.segment_len = s.at("segment_len").get<Real>();
  c.threshold = s.at("threshold").get<Real>();
  c.threaded = s.at("threaded").get<bool>();
  c.match_gain = s.at("match_gain").get<bool>();
  c.queue_capacity = s.at("queue_capacity").get<std::size_t>();
  return c;
}

json CmdStreamSim(const json &cfg, const fs::path &out) {
  const SplitManifest m = Manifest(cfg);
  const Separator model = TrainedModel(cfg);
  const auto backend = Backend(cfg);
  const StreamConfig sc = StreamSettings(cfg);
  const auto samples = Samples(cfg, m);
  fs::create_directories(out / "sync");
  Real mean = 0.0;
  std::size_t over_budget = 0;
  for (const MixtureTriple &t : samples) {
    const StreamResult r = SimulateStream(model, t, *backend, sc);
    json j = r.report.ToJson();
    j["sample_id"] = t.sample_id();
    j["over_budget_segments"] = r.over_budget;
    json log = json::array();
    for (const AssignmentEntry &e : r.state.assignment_log) {
      log.push_back({{"segment", e.segment},
                     {"permutation", e.permutation},
                     {"identity_score", e.identity_score},
                     {"swap_score", e.swap_score},
                     {"single_speaker", e.single_speaker},
                     {"kept_previous", e.kept_previous}});
    }
    j["assignment_log"] = log;
    WriteJson(out / "sync" / (t.sample_id() + ".json"), j);
    mean += r.report.error_rate;
    over_budget += r.over_budget;
  }
  mean /= static_cast<Real>(samples.size());
  const json summary = {{"samples", samples.size()},
                        {"segment_len", sc.segment_len},
                        {"mean_error_pct", 100.0 * mean},
                        {"over_budget_segments", over_budget}};
  WriteJson(out / "stream_summary.json", summary);
  return summary;
}

json CmdLengthSweep(const json &cfg, const fs::path &out) {
  const SplitManifest m = Manifest(cfg);
  const Separator model = TrainedModel(cfg);
  const auto backend = Backend(cfg);
  const auto samples = Samples(cfg, m);
  const auto lengths = cfg.at("stream").at("lengths").get<std::vector<Real>>();
  const auto rows = LengthSweep(model, samples, lengths, *backend, StreamSettings(cfg));
  WriteLengthSweepCsv(out / "length_sweep.csv", rows);
  WriteLengthSweepSvg(out / "length_sweep.svg", rows);
  std::vector<Real> err;
  for (const auto &r : rows) err.push_back(r.mean_error_pct);
  json summary = {{"samples", samples.size()}, {"lengths", lengths.size()}};
  if (lengths.size() >= 2) {
    const Real rho = Spearman(lengths, err);
    summary["spearman"] = std::isfinite(rho) ? json(rho) : json(nullptr);
  }
  WriteJson(out / "length_sweep.json", summary);
  return summary;
}

using Handler = json (*)(const json &, const fs::path &);

struct Flag {
  const char *name;
  const char *key;
  const char *help;
};

struct Command {
  const char *name;
  const char *help;
  Handler run;
  std::vector<Flag> flags;
};

const std::vector<Command> &Commands() {
  static const std::vector<Command> cmds = {
      {"prepare-data", "Segment stereo calls into triples and write a group split manifest",
       CmdPrepareData,
       {{"--corpus-dir", "data.corpus_dir", "Directory of stereo .wav/.mp3 calls"},
        {"--fractions", "data.fractions", "train,validation,test fractions"},
        {"--segment-seconds", "data.segment_seconds", "Segment length in seconds"},
        {"--sample-rate", "data.sample_rate", "Target sample rate"}}},
      {"synth-corpus", "Write a synthetic stereo call corpus", CmdSynthCorpus,
       {{"--count", "synth.count", "Number of calls"},
        {"--seconds", "synth.seconds", "Call duration"},
        {"--rms", "synth.rms", "Per-speaker RMS level"},
        {"--intermittent", "synth.intermittent", "Talk spurts instead of continuous voicing"}}},
      {"similarity-report", "Cosine similarity between the clean sources of each triple",
       CmdSimilarityReport,
       {{"--manifest", "data.manifest", "Split manifest"},
        {"--split", "data.split", "train, validation or test"},
        {"--n-samples", "data.n_samples", "Limit the number of samples (0 = all)"},
        {"--backend", "similarity.backend", "Embedding backend descriptor"},
        {"--embedder-cmd", "similarity.embedder_command", "External embedder command"}}},
      {"train", "Train a separator", CmdTrain,
       {{"--manifest", "data.manifest", "Split manifest"},
        {"--preset", "model.preset", "toy or full"},
        {"--epochs", "train.max_epochs", "Maximum epochs"},
        {"--patience", "train.patience", "Early-stop patience in epochs"},
        {"--lr", "train.learning_rate", "Learning rate"},
        {"--batch-size", "train.batch_size", "Batch size"},
        {"--max-steps", "train.max_steps", "Optimizer step limit (0 = none)"},
        {"--init", "train.init", "scratch or transfer"},
        {"--checkpoint", "train.checkpoint", "Transfer-learning source"},
        {"--weight-sl", "similarity.weight_sl", "Similarity penalty weight"},
        {"--backend", "similarity.backend", "Embedding backend descriptor"},
        {"--embedder-cmd", "similarity.embedder_command", "External embedder command"}}},
      {"sweep", "Train one model per (weight, layer) cell", CmdSweep,
       {{"--manifest", "data.manifest", "Split manifest"},
        {"--preset", "model.preset", "toy or full"},
        {"--weights", "sweep.weights", "Comma-separated similarity weights"},
        {"--layers", "sweep.layers", "Comma-separated embedding layers"},
        {"--backend", "sweep.backend", "stub or transformer"},
        {"--embedder-cmd", "similarity.embedder_command", "External embedder command"},
        {"--epochs", "train.max_epochs", "Maximum epochs"},
        {"--patience", "train.patience", "Early-stop patience in epochs"},
        {"--lr", "train.learning_rate", "Learning rate"},
        {"--batch-size", "train.batch_size", "Batch size"},
        {"--max-steps", "train.max_steps", "Optimizer step limit (0 = none)"}}},
      {"evaluate", "Per-sample SI-SDR metrics for a split", CmdEvaluate,
       {{"--manifest", "data.manifest", "Split manifest"},
        {"--split", "data.split", "train, validation or test"},
        {"--n-samples", "data.n_samples", "Limit the number of samples (0 = all)"},
        {"--checkpoint", "model.checkpoint", "Model checkpoint"}}},
      {"stream-sim", "Simulate streaming separation with channel assignment", CmdStreamSim,
       {{"--manifest", "data.manifest", "Split manifest"},
        {"--split", "data.split", "train, validation or test"},
        {"--n-samples", "data.n_samples", "Limit the number of samples (0 = all)"},
        {"--checkpoint", "model.checkpoint", "Model checkpoint"},
        {"--segment-len", "stream.segment_len", "Segment length in seconds"},
        {"--threshold", "stream.threshold", "Misplacement distance threshold"},
        {"--threaded", "stream.threaded", "Run producer and consumer on separate threads"},
        {"--backend", "similarity.backend", "Embedding backend descriptor"},
        {"--embedder-cmd", "similarity.embedder_command", "External embedder command"}}},
      {"length-sweep", "Synchronization error versus segment length", CmdLengthSweep,
       {{"--manifest", "data.manifest", "Split manifest"},
        {"--split", "data.split", "train, validation or test"},
        {"--n-samples", "data.n_samples", "Limit the number of samples (0 = all)"},
        {"--checkpoint", "model.checkpoint", "Model checkpoint"},
        {"--lengths", "stream.lengths", "Comma-separated segment lengths in seconds"},
        {"--threshold", "stream.threshold", "Misplacement distance threshold"},
        {"--backend", "similarity.backend", "Embedding backend descriptor"},
        {"--embedder-cmd", "similarity.embedder_command", "External embedder command"}}},
  };
  return cmds;
}

void PrintError(const std::string &kind, const std::string &message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int RunCli(const std::vector<std::string> &args) {
  std::vector<const char *> argv;
  for (const std::string &a : args) argv.push_back(a.c_str());
  return RunCli(static_cast<int>(argv.size()), argv.data());
}

int RunCli(int argc, const char *const *argv) {
  CLI::App app{"Conv-TasNet two-speaker separation toolkit", "tasnet"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seed;
  std::vector<std::string> overrides;
  struct Bound {
    CLI::Option *opt;
    const Flag *flag;
    std::string value;
  };
  std::map<std::string, std::vector<std::unique_ptr<Bound>>> bound;

  for (const Command &cmd : Commands()) {
    CLI::App *sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out-dir", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--set", overrides, "key=value config override (repeatable)");
    for (const Flag &f : cmd.flags) {
      auto b = std::make_unique<Bound>();
      b->flag = &f;
      b->opt = sub->add_option(f.name, b->value, f.help);
      bound[cmd.name].push_back(std::move(b));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  const Command *cmd = nullptr;
  for (const Command &c : Commands()) {
    if (app.got_subcommand(c.name)) cmd = &c;
  }

  json cfg = DefaultRunConfig();
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot open config file " + config_path);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception &e) {
        throw UsageError("config file is not valid JSON: " + std::string(e.what()));
      }
      // resolved_config.json snapshots carry the subcommand they came from
      if (file.is_object() && file.contains("command")) {
        if (file["command"] != cmd->name) {
          throw UsageError("config was resolved for '" + file["command"].dump() +
                           "', not '" + cmd->name + "'");
        }
        file.erase("command");
      }
      MergeChecked(cfg, file, "");
    }
    for (const auto &b : bound[cmd->name]) {
      if (b->opt->count() > 0) ApplyOverride(cfg, std::string(b->flag->key) + "=" + b->value);
    }
    if (!seed.empty()) ApplyOverride(cfg, "seed=" + seed);
    if (!out_dir.empty()) ApplyOverride(cfg, "out_dir=" + out_dir);
    for (const std::string &o : overrides) ApplyOverride(cfg, o);
  } catch (const UsageError &e) {
    PrintError("usage", e.what());
    return 2;
  }

  try {
    const fs::path out = cfg.at("out_dir").get<std::string>();
    fs::create_directories(out);
    json snapshot = cfg;
    snapshot["command"] = cmd->name;
    WriteJson(out / "resolved_config.json", snapshot);
    const json result = cmd->run(cfg, out);
    std::cout << result.dump() << std::endl;
    return 0;
  } catch (const UsageError &e) {
    PrintError("usage", e.what());
    return 2;
  } catch (const Error &e) {
    PrintError(std::string(ToString(e.kind())), e.what());
    return 1;
  } catch (const std::exception &e) {
    PrintError("internal", e.what());
    return 1;
  }
}

}  // namespace tasnet
