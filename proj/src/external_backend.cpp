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


#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>

#include "json.hpp"
#include "tasnet/embeddings.hpp"

namespace tasnet {

using nlohmann::json;

namespace {

constexpr int kModelRate = 16000;

void WriteAll(int fd, const std::string &data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      Throw(ErrorKind::kIo, std::string("embedder write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

struct ExternalBackend::Process {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;

  explicit Process(const std::string &command) {
    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
      Throw(ErrorKind::kIo, "cannot create embedder pipes");
    }
    pid = ::fork();
    if (pid < 0) Throw(ErrorKind::kIo, "cannot fork embedder process");
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child = in_pipe[1];
    from_child = out_pipe[0];
    ::fcntl(to_child, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child, F_SETFD, FD_CLOEXEC);
  }

  ~Process() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    if (pid > 0) {
      int status = 0;
      if (::waitpid(pid, &status, WNOHANG) == 0) {
        ::kill(pid, SIGTERM);
        ::waitpid(pid, &status, 0);
      }
    }
  }

  std::string ReadLine() {
    for (;;) {
      const auto nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::read(from_child, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) Throw(ErrorKind::kBackendMissing, "embedder process closed its output");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  json Call(const json &request) {
    WriteAll(to_child, request.dump() + "\n");
    json reply;
    try {
      reply = json::parse(ReadLine());
    } catch (const json::parse_error &e) {
      Throw(ErrorKind::kFormat, std::string("embedder sent invalid JSON: ") + e.what());
    }
    if (reply.contains("error")) {
      const std::string kind = reply.value("kind", "");
      const std::string msg = reply["error"].is_string() ? reply["error"].get<std::string>()
                                                          : reply["error"].dump();
      Throw(kind == "backend-length" ? ErrorKind::kBackendLength : ErrorKind::kIo,
            "embedder: " + msg);
    }
    return reply;
  }
};

ExternalBackend::ExternalBackend(BackendKind kind, int layer, std::string command)
    : kind_(kind), layer_(layer), command_(std::move(command)) {
  // A dead pipe must surface as an error, not terminate the process.
  ::signal(SIGPIPE, SIG_IGN);
  process_ = std::make_unique<Process>(command_);
  const json info = process_->Call({{"op", "info"}});
  min_samples_16k_ = info.value("min_samples", std::size_t{400});
}

ExternalBackend::~ExternalBackend() = default;

std::string ExternalBackend::descriptor() const {
  if (kind_ == BackendKind::kExternalTransformer) {
    return "transformer:layer=" + std::to_string(layer_);
  }
  return std::string(ToString(kind_));
}

std::size_t ExternalBackend::MinimumSamples(int sample_rate) const {
  if (sample_rate == kModelRate) return min_samples_16k_;
  return (min_samples_16k_ + 1) / 2;
}

std::vector<Real> ExternalBackend::ToModelRate(const Waveform &audio) const {
  if (audio.sample_rate == kModelRate) return audio.samples;
  if (audio.sample_rate * 2 == kModelRate) return Upsample2(audio.samples);
  Throw(ErrorKind::kInvalidArgument, "external embedders accept 8 or 16 kHz audio, got " +
                                         std::to_string(audio.sample_rate));
}

EmbeddingVector ExternalBackend::Embed(const Waveform &audio) const {
  if (audio.size() < MinimumSamples(audio.sample_rate)) {
    Throw(ErrorKind::kBackendLength, "embedding input too short: " +
                                         std::to_string(audio.size()) + " samples");
  }
  const std::vector<Real> samples = ToModelRate(audio);
  std::lock_guard<std::mutex> lock(mutex_);
  const json reply = process_->Call({{"op", "embed"},
                                     {"layer", layer_},
                                     {"sample_rate", kModelRate},
                                     {"samples", samples}});
  EmbeddingVector out;
  out.backend = kind_;
  out.layer = layer_;
  out.values = reply.at("embedding").get<std::vector<Real>>();
  if (out.values.empty()) Throw(ErrorKind::kDimension, "embedder returned an empty vector");
  return out;
}

std::vector<Real> ExternalBackend::EmbedBackward(const Waveform &audio,
                                                 std::span<const Real> d_embedding) const {
  const std::vector<Real> samples = ToModelRate(audio);
  std::vector<Real> grad;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const json reply = process_->Call(
        {{"op", "vjp"},
         {"layer", layer_},
         {"sample_rate", kModelRate},
         {"samples", samples},
         {"cotangent", std::vector<Real>(d_embedding.begin(), d_embedding.end())}});
    grad = reply.at("grad").get<std::vector<Real>>();
  }
  if (grad.size() != samples.size()) {
    Throw(ErrorKind::kShape, "embedder gradient length does not match its input");
  }
  if (audio.sample_rate == kModelRate) return grad;
  return Upsample2Adjoint(grad);
}

}  // namespace tasnet
