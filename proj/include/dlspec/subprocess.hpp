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

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlspec {

using Millis = std::chrono::milliseconds;

struct SpawnOptions {
  std::vector<std::string> argv;  // argv[0] is looked up on PATH
  std::map<std::string, std::string> env;  // added to (or replacing) the inherited environment
  std::optional<std::filesystem::path> cwd;
  bool clear_env = false;  // start from an empty environment
};

struct ExitStatus {
  int code = -1;    // exit code, or -1 when killed
  int signal = 0;   // terminating signal, 0 when exited normally

  bool success() const noexcept { return code == 0 && signal == 0; }
  std::string to_string() const;

  friend bool operator==(const ExitStatus&, const ExitStatus&) = default;
};

struct ProcessResult {
  ExitStatus status;
  std::string output;  // stdout and stderr interleaved
  bool timed_out = false;
};

/// Runs a command to completion, feeding `input` on stdin. A zero timeout
/// waits forever. Throws Error(spawn_failure) when the program cannot start.
ProcessResult run_process(const SpawnOptions& options, Millis timeout = Millis{0},
                          std::string_view input = {});

/// Resolves a program name against PATH; empty when absent.
std::filesystem::path find_program(std::string_view name);

/// A running child with pipes on stdin and stdout. stderr is collected in
/// the background and kept to its last 64 KiB.
class ChildProcess {
 public:
  static std::unique_ptr<ChildProcess> spawn(const SpawnOptions& options);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  pid_t pid() const noexcept { return pid_; }

  /// False when the child has closed its stdin.
  bool write_all(std::string_view bytes);
  /// Reads exactly n bytes before `deadline`. Returns false on EOF;
  /// throws Error(handshake_timeout) when the deadline passes.
  bool read_exact(char* buf, std::size_t n, std::chrono::steady_clock::time_point deadline);
  void close_stdin();

  /// Exit status if the child has exited within `timeout`.
  std::optional<ExitStatus> wait_for(Millis timeout);
  /// SIGTERM, then SIGKILL after `grace`. Always reaps.
  ExitStatus terminate(Millis grace);
  std::optional<ExitStatus> exit_status() const { return status_; }

  std::string stderr_text() const;
  /// stderr_text once the child's stderr reaches EOF or `timeout` passes.
  std::string collect_stderr(Millis timeout) const;

 private:
  ChildProcess() = default;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::optional<ExitStatus> status_;
};

}  // namespace dlspec
