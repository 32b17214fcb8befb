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

#include <fstream>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "tasnet/cli.hpp"
#include "test_util.hpp"

using namespace tasnet;
using nlohmann::json;
using tasnet::testing::TempDir;

namespace {

struct Captured {
  int code = 0;
  std::string out;
  std::string err;
};

Captured Run(std::vector<std::string> args) {
  args.insert(args.begin(), "tasnet");
  std::ostringstream out, err;
  auto *old_out = std::cout.rdbuf(out.rdbuf());
  auto *old_err = std::cerr.rdbuf(err.rdbuf());
  Captured c;
  c.code = RunCli(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  c.out = out.str();
  c.err = err.str();
  return c;
}

std::string Slurp(const std::filesystem::path &p) {
  std::ifstream in(p);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

const std::vector<std::string> kTinyModel = {
    "--set", "model.num_filters=16", "--set", "model.bottleneck=8",
    "--set", "model.conv_channels=16", "--set", "model.blocks_per_repeat=2"};

std::vector<std::string> Cat(std::vector<std::string> a, const std::vector<std::string> &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("overrides") {
  json cfg = DefaultRunConfig();
  ApplyOverride(cfg, "train.learning_rate=0.01");
  CHECK(cfg["train"]["learning_rate"] == 0.01);
  ApplyOverride(cfg, "sweep.weights=1,2.5");
  CHECK(cfg["sweep"]["weights"] == json::array({1, 2.5}));
  ApplyOverride(cfg, "sweep.layers=7");
  CHECK(cfg["sweep"]["layers"] == json::array({7}));
  ApplyOverride(cfg, "data.corpus_dir=123");
  CHECK(cfg["data"]["corpus_dir"] == "123");
  ApplyOverride(cfg, "model.kernel=5");
  CHECK(cfg["model"]["kernel"] == 5);
  CHECK_THROWS(ApplyOverride(cfg, "train.nope=1"));
  CHECK_THROWS(ApplyOverride(cfg, "train=1"));
  CHECK_THROWS(ApplyOverride(cfg, "train.batch_size=four"));
  CHECK_THROWS(ApplyOverride(cfg, "novalue"));
}

TEST_CASE("usage errors exit with 2") {
  CHECK(Run({}).code == 2);
  CHECK(Run({"frobnicate"}).code == 2);
  CHECK(Run({"train", "--bogus"}).code == 2);
  TempDir dir("cli_usage");
  const Captured c = Run({"train", "--out-dir", dir.path().string(), "--set", "train.nope=3"});
  CHECK(c.code == 2);
  CHECK(json::parse(c.err).at("error") == "usage");
  CHECK(Run({"evaluate", "--out-dir", dir.path().string()}).code == 2);
  std::ofstream(dir / "bad.json") << R"({"train": {"epochs": 3}})";
  CHECK(Run({"train", "--config", (dir / "bad.json").string()}).code == 2);
  CHECK(Run({"--help"}).code == 0);
}

TEST_CASE("runtime failures exit with 1 and a JSON error") {
  TempDir dir("cli_fail");
  const Captured c = Run({"evaluate", "--out-dir", dir.path().string(), "--manifest",
                          (dir / "missing.json").string(), "--checkpoint", "x.ckpt"});
  CHECK(c.code == 1);
  const json err = json::parse(c.err);
  CHECK(err.at("error") == "io");
  CHECK(err.at("message").get<std::string>().find("missing.json") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "resolved_config.json"));
}

TEST_CASE("end-to-end pipeline") {
  TempDir root("cli_e2e");
  const std::string corpus = (root / "corpus").string(), data = (root / "data").string();
  REQUIRE(Run({"synth-corpus", "--out-dir", corpus, "--count", "5", "--seconds", "2",
               "--seed", "3"}).code == 0);
  const Captured prep = Run({"prepare-data", "--out-dir", data, "--corpus-dir", corpus,
                             "--segment-seconds", "1", "--seed", "11"});
  REQUIRE(prep.code == 0);
  CHECK(json::parse(prep.out).at("train").get<int>() > 0);
  const std::string manifest = data + "/manifest.json";

  // the snapshot reproduces the manifest byte for byte
  const std::string again = (root / "again").string();
  REQUIRE(Run({"prepare-data", "--config", data + "/resolved_config.json", "--out-dir", again})
              .code == 0);
  CHECK(Slurp(manifest) == Slurp(again + "/manifest.json"));
  CHECK(Run({"train", "--config", data + "/resolved_config.json", "--out-dir", again}).code == 2);

  const std::string run = (root / "run").string();
  REQUIRE(Run(Cat({"train", "--out-dir", run, "--manifest", manifest, "--epochs", "1",
                   "--batch-size", "2"},
                  kTinyModel))
              .code == 0);
  const json snapshot = json::parse(Slurp(run + "/resolved_config.json"));
  CHECK(snapshot.at("command") == "train");
  CHECK(snapshot.at("model").at("num_filters") == 16);
  const std::string ckpt = run + "/best.ckpt";
  REQUIRE(std::filesystem::exists(ckpt));

  const std::string eval = (root / "eval").string();
  REQUIRE(Run({"evaluate", "--out-dir", eval, "--manifest", manifest, "--checkpoint", ckpt})
              .code == 0);
  CHECK(std::filesystem::exists(eval + "/metrics.csv"));

  const std::string sim = (root / "sim").string();
  const Captured s = Run({"stream-sim", "--out-dir", sim, "--manifest", manifest, "--checkpoint",
                          ckpt, "--split", "train", "--n-samples", "2", "--segment-len", "0.5"});
  REQUIRE(s.code == 0);
  CHECK(json::parse(s.out).at("samples") == 2);
  CHECK(std::filesystem::exists(sim + "/stream_summary.json"));

  const std::string sweep = (root / "len").string();
  REQUIRE(Run({"length-sweep", "--out-dir", sweep, "--manifest", manifest, "--checkpoint", ckpt,
               "--split", "train", "--lengths", "0.25,0.5,1"})
              .code == 0);
  CHECK(std::filesystem::exists(sweep + "/length_sweep.csv"));
  CHECK(std::filesystem::exists(sweep + "/length_sweep.svg"));

  const std::string sim_out = (root / "css").string();
  REQUIRE(Run({"similarity-report", "--out-dir", sim_out, "--manifest", manifest, "--split",
               "train"})
              .code == 0);
  CHECK(Slurp(sim_out + "/similarity.csv").rfind("sample_id,css,backend,layer", 0) == 0);

  const std::string grid = (root / "grid").string();
  REQUIRE(Run(Cat({"sweep", "--out-dir", grid, "--manifest", manifest, "--weights", "5",
                   "--layers", "1", "--epochs", "1"},
                  kTinyModel))
              .code == 0);
  CHECK(std::filesystem::exists(grid + "/sweep_results.csv"));
}

}  // TEST_SUITE
