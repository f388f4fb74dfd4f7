// Copyright 2026 The dlspec Authors
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

// Execution environments. The container backend drives an OCI engine
// through its command line; the process backend runs the worker directly
// on the host.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlspec/counters.hpp"
#include "dlspec/protocol.hpp"
#include "dlspec/subprocess.hpp"

namespace dlspec {

enum class BackendKind { container, process };

std::string_view backend_name(BackendKind k) noexcept;
std::optional<BackendKind> parse_backend(std::string_view text) noexcept;

struct Mount {
  std::filesystem::path source;  // host path
  std::filesystem::path target;  // path inside the environment
  bool read_only = true;
};

struct ExecutionSpec {
  BackendKind backend = BackendKind::process;
  std::string image;
  std::map<std::string, std::string> env;
  std::vector<Mount> mounts;
  std::filesystem::path workdir;
};

inline constexpr Millis kDefaultGrace{5000};
inline constexpr Millis kDefaultHandshakeTimeout{30000};

struct BackendOptions {
  /// Engine program. Empty picks the first of docker, podman on PATH.
  std::string engine;
  /// Passed verbatim to `<engine> run`.
  std::vector<std::string> engine_args;
  Millis grace = kDefaultGrace;
  Millis handshake_timeout = kDefaultHandshakeTimeout;
  /// Per-message timeout after the handshake; zero waits forever.
  Millis reply_timeout{0};
  Counters* counters = nullptr;
};

/// Bidirectional framed channel to one worker process.
class WorkerChannel {
 public:
  WorkerChannel(std::unique_ptr<ChildProcess> child, Counters* counters);
  ~WorkerChannel();
  WorkerChannel(const WorkerChannel&) = delete;
  WorkerChannel& operator=(const WorkerChannel&) = delete;

  /// HELLO / HELLO_ACK. Throws Error(spawn_failure) when the worker exits
  /// first, Error(handshake_timeout) or Error(protocol_mismatch).
  void handshake(Millis timeout);

  void send(const protocol::json& message);
  /// Throws Error(protocol_violation) on EOF or a malformed frame, and
  /// Error(handshake_timeout) when `timeout` (if non-zero) passes.
  protocol::json receive(Millis timeout = Millis{0});

  /// LOAD. Throws protocol::StageError(compile_error).
  void load(const ModelManifest& model, const protocol::json& ctx, Millis timeout = Millis{0});
  /// RUN. Throws protocol::StageError(stage_failed).
  protocol::RunResult run(const std::vector<std::string>& initial_data,
                          std::size_t output_cap = protocol::kDefaultOutputCap,
                          Millis timeout = Millis{0});

  /// TERMINATE, wait up to `grace`, then kill. Idempotent.
  ExitStatus close(Millis grace);
  bool closed() const noexcept { return closed_; }
  std::string stderr_text() const;

 private:
  std::unique_ptr<ChildProcess> child_;
  Counters* counters_;
  bool closed_ = false;
  ExitStatus status_;
};

struct ExitReport {
  std::optional<ExitStatus> worker;
  bool stopped = false;
  std::vector<std::string> notes;  // best-effort failures, never thrown
};

/// A live environment. Every operation after shutdown() throws
/// Error(terminated_handle), except shutdown() itself.
class Environment {
 public:
  virtual ~Environment() = default;

  const std::string& id() const noexcept { return id_; }
  BackendKind kind() const noexcept { return kind_; }
  bool live() const noexcept { return live_; }

  /// Path under which a host path is visible inside the environment.
  std::string map_path(const std::filesystem::path& host_path) const;

  /// Starts `argv` inside the environment and completes the handshake.
  WorkerChannel& start_worker(const std::vector<std::string>& argv);
  WorkerChannel* worker() noexcept { return worker_.get(); }

  ExitReport shutdown();

 protected:
  Environment(std::string id, BackendKind kind, ExecutionSpec spec, BackendOptions opts);
  void check_live() const;
  virtual SpawnOptions worker_spawn(const std::vector<std::string>& argv) const = 0;
  virtual void stop(ExitReport& report) = 0;

  ExecutionSpec spec_;
  BackendOptions opts_;

 private:
  std::string id_;
  BackendKind kind_;
  bool live_ = true;
  std::unique_ptr<WorkerChannel> worker_;
  ExitReport last_report_;
};

/// Validates the spec and launches. Throws Error(mount_source_missing),
/// Error(engine_missing), Error(image_not_found), Error(launch_failed) or
/// Error(malformed) for a container spec without an image.
std::unique_ptr<Environment> launch(const ExecutionSpec& spec, const BackendOptions& opts = {});

/// Engine binary that `launch` would use, or empty.
std::string resolve_engine(const std::string& requested);

}  // namespace dlspec
