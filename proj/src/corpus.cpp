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

#include "tasnet/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tasnet/audio_io.hpp"

namespace tasnet {

namespace fs = std::filesystem;
using nlohmann::json;

StereoCall LoadStereoCall(const fs::path &path, int target_rate) {
  AudioData audio = ReadAudio(path);
  if (audio.channels.size() != 2) {
    Throw(ErrorKind::kChannelCount, path.string() + ": expected 2 channels, found " +
                                        std::to_string(audio.channels.size()));
  }
  StereoCall call;
  call.source1 = {Resample(audio.channels[0], audio.sample_rate, target_rate), target_rate};
  call.source2 = {Resample(audio.channels[1], audio.sample_rate, target_rate), target_rate};
  return call;
}

Mixture MakeMixture(const Waveform &source1, const Waveform &source2) {
  if (source1.size() != source2.size() || source1.sample_rate != source2.sample_rate) {
    Throw(ErrorKind::kAlignment, "sources differ in length or sample rate");
  }
  Mixture m;
  m.audio.sample_rate = source1.sample_rate;
  m.audio.samples.resize(source1.size());
  for (std::size_t i = 0; i < source1.size(); ++i) {
    const Real v = source1.samples[i] + source2.samples[i];
    const Real c = std::clamp(v, Real{-1}, Real{1});
    if (c != v) ++m.clipped_samples;
    m.audio.samples[i] = c;
  }
  m.clipped = m.clipped_samples > 0;
  return m;
}

std::string MixtureTriple::sample_id() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", segment_index);
  return group_id + "_" + buf;
}

std::vector<MixtureTriple> SegmentTriples(const StereoCall &call, const std::string &group_id,
                                          Real segment_seconds) {
  if (!(segment_seconds > 0.0)) {
    Throw(ErrorKind::kInvalidArgument, "segment length must be positive");
  }
  if (call.source1.size() != call.source2.size() ||
      call.source1.sample_rate != call.source2.sample_rate) {
    Throw(ErrorKind::kAlignment, "call channels differ in length or sample rate");
  }
  const int rate = call.source1.sample_rate;
  const auto seg = static_cast<std::size_t>(std::llround(segment_seconds * rate));
  std::vector<MixtureTriple> out;
  if (seg == 0) return out;
  for (std::size_t k = 0; (k + 1) * seg <= call.source1.size(); ++k) {
    MixtureTriple t;
    t.source1 = Slice(call.source1, k * seg, seg);
    t.source2 = Slice(call.source2, k * seg, seg);
    Mixture m = MakeMixture(t.source1, t.source2);
    t.mixture = std::move(m.audio);
    t.clipped = m.clipped;
    t.group_id = group_id;
    t.segment_index = static_cast<int>(k);
    out.push_back(std::move(t));
  }
  return out;
}

const std::vector<TripleRef> &SplitManifest::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "validation" || name == "val") return validation;
  if (name == "test") return test;
  Throw(ErrorKind::kInvalidArgument, "unknown split: " + std::string(name));
}

void ValidateFractions(const std::array<Real, 3> &fractions) {
  Real sum = 0.0;
  for (Real f : fractions) {
    if (!(f > 0.0)) Throw(ErrorKind::kInvalidArgument, "split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    Throw(ErrorKind::kInvalidArgument, "split fractions must sum to 1");
  }
}

SplitManifest GroupShuffleSplit(std::span<const TripleRef> triples,
                                const std::array<Real, 3> &fractions, std::uint64_t seed) {
  ValidateFractions(fractions);
  std::map<std::string, Real> duration;
  for (const TripleRef &t : triples) duration[t.group_id] += t.seconds();
  if (duration.size() < 3) {
    Throw(ErrorKind::kInsufficientGroups,
          "need at least 3 distinct groups, found " + std::to_string(duration.size()));
  }
  std::vector<std::string> groups;
  Real total = 0.0;
  for (const auto &[g, d] : duration) {
    groups.push_back(g);
    total += d;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = groups.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(groups[i - 1], groups[pick(rng)]);
  }

  // Each group goes to the split furthest below its duration target.
  std::array<Real, 3> assigned{};
  std::array<std::vector<std::string>, 3> members;
  for (const std::string &g : groups) {
    std::size_t best = 0;
    Real best_deficit = -std::numeric_limits<Real>::infinity();
    for (std::size_t s = 0; s < 3; ++s) {
      const Real deficit = fractions[s] * total - assigned[s];
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = s;
      }
    }
    assigned[best] += duration[g];
    members[best].push_back(g);
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (!members[s].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t d = 1; d < 3; ++d) {
      if (members[d].size() > members[donor].size()) donor = d;
    }
    members[s].push_back(members[donor].back());
    members[donor].pop_back();
  }

  std::map<std::string, std::size_t> split_of;
  for (std::size_t s = 0; s < 3; ++s) {
    for (const std::string &g : members[s]) split_of[g] = s;
  }
  SplitManifest m;
  m.fractions = fractions;
  m.seed = seed;
  std::array<std::vector<TripleRef> *, 3> dst{&m.train, &m.validation, &m.test};
  for (const TripleRef &t : triples) dst[split_of[t.group_id]]->push_back(t);
  return m;
}

TripleRef MakeRef(const MixtureTriple &triple) {
  TripleRef r;
  r.sample_id = triple.sample_id();
  r.group_id = triple.group_id;
  r.segment_index = triple.segment_index;
  r.num_samples = triple.size();
  r.sample_rate = triple.mixture.sample_rate;
  const std::string dir = "triples/" + r.sample_id + "/";
  r.mixture = dir + "mixture.wav";
  r.source1 = dir + "s1.wav";
  r.source2 = dir + "s2.wav";
  return r;
}

SplitManifest GroupShuffleSplit(std::span<const MixtureTriple> triples,
                                const std::array<Real, 3> &fractions, std::uint64_t seed) {
  std::vector<TripleRef> refs;
  refs.reserve(triples.size());
  for (const MixtureTriple &t : triples) refs.push_back(MakeRef(t));
  return GroupShuffleSplit(refs, fractions, seed);
}

TripleRef WriteTriple(const fs::path &root, const MixtureTriple &triple) {
  const TripleRef r = MakeRef(triple);
  WriteWav(root / r.mixture, triple.mixture, WavEncoding::kFloat64);
  WriteWav(root / r.source1, triple.source1, WavEncoding::kFloat64);
  WriteWav(root / r.source2, triple.source2, WavEncoding::kFloat64);
  return r;
}

MixtureTriple LoadTriple(const SplitManifest &manifest, const TripleRef &ref) {
  MixtureTriple t;
  t.mixture = ReadMono(manifest.root / ref.mixture);
  t.source1 = ReadMono(manifest.root / ref.source1);
  t.source2 = ReadMono(manifest.root / ref.source2);
  if (t.source1.size() != t.mixture.size() || t.source2.size() != t.mixture.size()) {
    Throw(ErrorKind::kAlignment, ref.sample_id + ": triple files differ in length");
  }
  t.group_id = ref.group_id;
  t.segment_index = ref.segment_index;
  return t;
}

namespace {

json RefToJson(const TripleRef &r) {
  return {{"sample_id", r.sample_id},     {"group_id", r.group_id},
          {"segment_index", r.segment_index}, {"num_samples", r.num_samples},
          {"sample_rate", r.sample_rate}, {"mixture", r.mixture},
          {"s1", r.source1},              {"s2", r.source2}};
}

TripleRef RefFromJson(const json &j) {
  TripleRef r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.group_id = j.at("group_id").get<std::string>();
  r.segment_index = j.at("segment_index").get<int>();
  r.num_samples = j.at("num_samples").get<std::size_t>();
  r.sample_rate = j.at("sample_rate").get<int>();
  r.mixture = j.at("mixture").get<std::string>();
  r.source1 = j.at("s1").get<std::string>();
  r.source2 = j.at("s2").get<std::string>();
  return r;
}

}  // namespace

void SaveManifest(const SplitManifest &m, const fs::path &path) {
  json j;
  j["version"] = 1;
  j["seed"] = m.seed;
  j["fractions"] = m.fractions;
  j["segment_seconds"] = m.segment_seconds;
  for (const char *name : {"train", "validation", "test"}) {
    json arr = json::array();
    for (const TripleRef &r : m.split(name)) arr.push_back(RefToJson(r));
    j[name] = std::move(arr);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) Throw(ErrorKind::kIo, "cannot write " + path.string());
}

SplitManifest LoadManifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in) Throw(ErrorKind::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    Throw(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  SplitManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.fractions = j.at("fractions").get<std::array<Real, 3>>();
    m.segment_seconds = j.value("segment_seconds", 30.0);
    for (const auto &r : j.at("train")) m.train.push_back(RefFromJson(r));
    for (const auto &r : j.at("validation")) m.validation.push_back(RefFromJson(r));
    for (const auto &r : j.at("test")) m.test.push_back(RefFromJson(r));
  } catch (const json::exception &e) {
    Throw(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  m.root = path.parent_path();
  return m;
}

namespace {

std::map<std::string, std::string> ReadGroups(const fs::path &csv) {
  std::map<std::string, std::string> groups;
  std::ifstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      Throw(ErrorKind::kFormat, csv.string() + ": expected 'path,group' rows");
    }
    std::string group = line.substr(comma + 1);
    while (!group.empty() && (group.back() == '\r' || group.back() == ' ')) group.pop_back();
    groups[line.substr(0, comma)] = group;
  }
  return groups;
}

}  // namespace

SplitManifest PrepareCorpus(const fs::path &corpus_dir, const fs::path &out_dir,
                            const PrepareOptions &opts) {
  ValidateFractions(opts.fractions);
  if (!fs::is_directory(corpus_dir)) {
    Throw(ErrorKind::kIo, "corpus directory not found: " + corpus_dir.string());
  }
  std::map<std::string, std::string> groups;
  if (fs::exists(corpus_dir / "groups.csv")) groups = ReadGroups(corpus_dir / "groups.csv");

  std::vector<fs::path> files;
  for (const auto &entry : fs::recursive_directory_iterator(corpus_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".wav" || ext == ".mp3") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<TripleRef> refs;
  for (const fs::path &file : files) {
    const std::string rel = fs::relative(file, corpus_dir).generic_string();
    const auto it = groups.find(rel);
    const std::string group = it != groups.end() ? it->second : file.stem().string();
    const StereoCall call = LoadStereoCall(file, opts.sample_rate);
    // Triples are keyed by file stem so two calls sharing a group stay apart.
    for (MixtureTriple &t : SegmentTriples(call, file.stem().string(), opts.segment_seconds)) {
      TripleRef r = WriteTriple(out_dir, t);
      r.group_id = group;
      refs.push_back(std::move(r));
    }
  }
  SplitManifest m = GroupShuffleSplit(refs, opts.fractions, opts.seed);
  m.segment_seconds = opts.segment_seconds;
  m.root = out_dir;
  SaveManifest(m, out_dir / "manifest.json");
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic talkers

namespace {

struct Talker {
  Real f0 = 120.0;
  Real vibrato_rate = 5.0;
  Real vibrato_depth = 0.03;
  Real syllable_rate = 4.0;
  Real phase = 0.0;
  std::array<Real, 3> formants{};
  std::array<Real, 3> bandwidths{};
};

Talker DrawTalker(std::mt19937_64 &rng, Real f0_lo, Real f0_hi) {
  std::uniform_real_distribution<Real> u(0.0, 1.0);
  Talker t;
  t.f0 = f0_lo + (f0_hi - f0_lo) * u(rng);
  t.vibrato_rate = 3.0 + 4.0 * u(rng);
  t.vibrato_depth = 0.02 + 0.04 * u(rng);
  t.syllable_rate = 3.0 + 3.0 * u(rng);
  t.phase = 2.0 * std::numbers::pi * u(rng);
  t.formants = {300.0 + 600.0 * u(rng), 900.0 + 1300.0 * u(rng), 2200.0 + 1100.0 * u(rng)};
  t.bandwidths = {80.0 + 120.0 * u(rng), 100.0 + 150.0 * u(rng), 150.0 + 200.0 * u(rng)};
  return t;
}

std::vector<Real> Gate(std::mt19937_64 &rng, std::size_t n, int rate) {
  std::exponential_distribution<Real> on(1.0 / 1.2), off(1.0 / 0.6);
  std::vector<Real> g(n, 0.0);
  std::bernoulli_distribution start(0.5);
  bool active = start(rng);
  std::size_t pos = 0;
  while (pos < n) {
    const Real dur = active ? std::max(0.3, on(rng)) : std::clamp(off(rng), 0.15, 0.9);
    const std::size_t len = static_cast<std::size_t>(dur * rate);
    for (std::size_t i = pos; i < std::min(n, pos + len); ++i) g[i] = active ? 1.0 : 0.0;
    pos += len;
    active = !active;
  }
  // 20 ms raised-cosine ramps
  const std::size_t ramp = static_cast<std::size_t>(0.02 * rate);
  std::vector<Real> smooth(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Real acc = 0.0, wsum = 0.0;
    for (std::size_t k = 0; k <= 2 * ramp; ++k) {
      const long j = static_cast<long>(i + k) - static_cast<long>(ramp);
      if (j < 0 || j >= static_cast<long>(n)) continue;
      const Real w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (k + 1.0) / (2.0 * ramp + 2.0));
      acc += w * g[static_cast<std::size_t>(j)];
      wsum += w;
    }
    smooth[i] = acc / wsum;
  }
  return smooth;
}

std::vector<Real> Voice(const Talker &t, std::size_t n, int rate, std::mt19937_64 &rng) {
  const Real nyquist = 0.45 * rate;
  std::vector<Real> x(n, 0.0);
  std::uniform_real_distribution<Real> u(0.0, 2.0 * std::numbers::pi);
  const std::size_t max_harm = static_cast<std::size_t>(nyquist / (t.f0 * 0.9));
  std::vector<Real> harm_phase(max_harm + 1);
  for (Real &p : harm_phase) p = u(rng);
  Real phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real time = static_cast<Real>(i) / rate;
    const Real f0 = t.f0 * (1.0 + t.vibrato_depth *
                                      std::sin(2.0 * std::numbers::pi * t.vibrato_rate * time));
    phase += 2.0 * std::numbers::pi * f0 / rate;
    Real s = 0.0;
    for (std::size_t h = 1; h <= max_harm; ++h) {
      const Real f = f0 * static_cast<Real>(h);
      if (f >= nyquist) break;
      Real amp = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        const Real z = (f - t.formants[k]) / t.bandwidths[k];
        amp += std::exp(-0.5 * z * z) / static_cast<Real>(k + 1);
      }
      s += (amp + 0.02) * std::sin(static_cast<Real>(h) * phase + harm_phase[h]);
    }
    const Real env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t.syllable_rate * time +
                                          t.phase);
    x[i] = s * (0.2 + 0.8 * env);
  }
  return x;
}

void Normalize(std::vector<Real> &x, const std::vector<Real> &gate, Real rms) {
  Real e = 0.0, w = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e += x[i] * x[i] * gate[i];
    w += gate[i];
  }
  if (e <= 0.0 || w <= 0.0) return;
  const Real scale = rms / std::sqrt(e / w);
  for (Real &v : x) v *= scale;
}

}  // namespace

StereoCall SyntheticCall(const SyntheticOptions &opts, std::uint64_t index) {
  if (opts.sample_rate <= 0 || !(opts.seconds > 0.0) || !(opts.rms > 0.0)) {
    Throw(ErrorKind::kInvalidArgument, "bad synthetic corpus options");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  const std::size_t n = static_cast<std::size_t>(std::llround(opts.seconds * opts.sample_rate));
  // One low and one high voice keeps the pair distinct.
  std::bernoulli_distribution flip(0.5);
  Talker a = DrawTalker(rng, 85.0, 150.0);
  Talker b = DrawTalker(rng, 180.0, 280.0);
  if (flip(rng)) std::swap(a, b);

  StereoCall call;
  std::vector<Real> ga(n, 1.0), gb(n, 1.0);
  if (opts.intermittent) {
    ga = Gate(rng, n, opts.sample_rate);
    gb = Gate(rng, n, opts.sample_rate);
  }
  std::vector<Real> xa = Voice(a, n, opts.sample_rate, rng);
  std::vector<Real> xb = Voice(b, n, opts.sample_rate, rng);
  for (std::size_t i = 0; i < n; ++i) {
    xa[i] *= ga[i];
    xb[i] *= gb[i];
  }
  Normalize(xa, ga, opts.rms);
  Normalize(xb, gb, opts.rms);
  call.source1 = {std::move(xa), opts.sample_rate};
  call.source2 = {std::move(xb), opts.sample_rate};
  return call;
}

std::vector<MixtureTriple> SyntheticTriples(const SyntheticOptions &opts, std::size_t count) {
  std::vector<MixtureTriple> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const StereoCall call = SyntheticCall(opts, i);
    char group[32];
    std::snprintf(group, sizeof(group), "synth%03zu", i);
    auto triples = SegmentTriples(call, group, opts.seconds);
    out.push_back(std::move(triples.at(0)));
  }
  return out;
}

void WriteSyntheticCorpus(const fs::path &dir, const SyntheticOptions &opts, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    const StereoCall call = SyntheticCall(opts, i);
    char name[32];
    std::snprintf(name, sizeof(name), "call_%03zu.wav", i);
    WriteWav(dir / name, AudioData{{call.source1.samples, call.source2.samples}, opts.sample_rate},
             WavEncoding::kFloat32);
  }
}

}  // namespace tasnet
