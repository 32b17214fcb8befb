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

#include <array>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tasnet/corpus.hpp"
#include "tasnet/embeddings.hpp"
#include "tasnet/model.hpp"

namespace tasnet {

struct StreamSegment {
  int index = 0;
  Waveform audio;
  Real arrival_time = 0.0;  // virtual seconds at which the segment is complete
  bool partial = false;     // shorter than the nominal length
};

/// Consecutive segments in arrival order; a shorter remainder becomes a final
/// partial segment.
std::vector<StreamSegment> SegmentStream(const Waveform &mixture, Real segment_len);

/// Blocking FIFO with a fixed capacity. Push blocks while full; Pop blocks
/// until an item arrives or the queue is closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  /// Returns false if the queue was closed.
  bool Push(T item) {
    std::unique_lock<std::mutex> lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> Pop() {
    std::unique_lock<std::mutex> lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void Close() {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

struct AssignmentEntry {
  int segment = 0;
  std::array<int, 2> permutation{0, 1};  // channel k plays estimate permutation[k]
  Real identity_score = 0.0;
  Real swap_score = 0.0;
  bool single_speaker = false;
  bool kept_previous = false;  // tie, silence or too-short segment
};

struct ChannelState {
  std::optional<std::array<EmbeddingVector, 2>> references;
  std::vector<AssignmentEntry> assignment_log;
  std::array<int, 2> last{0, 1};

  bool initialized() const { return references.has_value(); }
};

inline constexpr Real kReferenceSeconds = 1.0;
inline constexpr Real kAssignmentTie = 1e-9;
inline constexpr Real kSingleSpeakerEnergyRatio = 0.01;

/// Embeds the two reference clips, which must be exactly one second long.
ChannelState InitChannelState(const Waveform &reference1, const Waveform &reference2,
                              const EmbeddingBackend &backend);

/// The first one-second window (half-second hop) whose energy reaches half
/// of the source's mean energy per second.
Waveform PickReferenceClip(const Waveform &source);

/// Orders `estimates` so channel k carries the estimate closest to
/// reference k. Throws kMissingReference if `state` is not initialised.
SeparatedSources AssignChannels(const SeparatedSources &estimates, ChannelState &state,
                                const EmbeddingBackend &backend, int segment_index);

struct SegmentSync {
  int index = 0;
  Real d1 = 0.0;
  Real d2 = 0.0;
  bool misplaced = false;
  bool partial = false;
};

struct SyncReport {
  std::vector<SegmentSync> segments;
  std::size_t misplaced = 0;
  std::size_t total = 0;  // whole segments only
  Real error_rate = 0.0;
  Real segment_len = 0.0;
  Real threshold = 1.0;

  /// Percentage truncated to one decimal, e.g. 2/30 -> "6.6".
  std::string ErrorPercent() const;
  nlohmann::json ToJson() const;
};

/// Per segment and channel, d = ||clean - delivered||_2. A whole segment is
/// misplaced when either distance exceeds `threshold`.
SyncReport SyncError(const std::array<Waveform, 2> &clean, const std::array<Waveform, 2> &delivered,
                     Real segment_len, Real threshold = 1.0);

struct StreamConfig {
  Real segment_len = 2.0;
  Real threshold = 1.0;
  std::size_t queue_capacity = 4;
  bool threaded = false;  // producer and consumer on separate threads
  bool match_gain = true;  // see MatchMixtureGain
};

/// Rescales the two estimates by the gains that best reconstruct `mixture`
/// in the least-squares sense. SI-SNR training leaves output gain and
/// polarity free; this puts the estimates back on the mixture's scale.
void MatchMixtureGain(SeparatedSources &estimates, const Waveform &mixture);

struct StreamResult {
  std::array<Waveform, 2> delivered;
  SyncReport report;
  ChannelState state;
  std::vector<int> processed_order;
  std::vector<Real> processing_seconds;
  std::size_t over_budget = 0;  // segments whose processing exceeded their duration
};

/// Streams the triple's mixture through separation and channel assignment.
/// References are taken from the clean sources with PickReferenceClip.
StreamResult SimulateStream(const Separator &model, const MixtureTriple &triple,
                            const EmbeddingBackend &backend, const StreamConfig &cfg);

struct LengthSweepRow {
  Real segment_len_s = 0.0;
  Real mean_error_pct = 0.0;
  std::size_t n_samples = 0;
};

std::vector<LengthSweepRow> LengthSweep(const Separator &model,
                                        std::span<const MixtureTriple> samples,
                                        std::span<const Real> lengths,
                                        const EmbeddingBackend &backend,
                                        const StreamConfig &base = {});

/// Columns: segment_len_s, mean_error_pct, n_samples.
void WriteLengthSweepCsv(const std::filesystem::path &path, std::span<const LengthSweepRow> rows);
/// Error-versus-length line plot.
void WriteLengthSweepSvg(const std::filesystem::path &path, std::span<const LengthSweepRow> rows);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// input is constant.
Real Spearman(std::span<const Real> x, std::span<const Real> y);

}  // namespace tasnet
