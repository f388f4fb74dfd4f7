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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlspec/counters.hpp"
#include "dlspec/error.hpp"
#include "dlspec/manifest.hpp"
#include "dlspec/subprocess.hpp"

namespace dlspec {

struct HostDescription {
  enum class Source { probed, declared };

  std::map<std::string, Scalar> values;
  Source source = Source::probed;

  const Scalar* find(const std::string& key) const;
  friend bool operator==(const HostDescription&, const HostDescription&) = default;
};

/// architecture, os, num_cpus and memory_gb always; kernel, cpu.model,
/// cpu.turbo_boost and gpu.count only where the host exposes them.
HostDescription probe_host();

/// `kind: host` documents. Throws ManifestError.
HostDescription parse_host_file(std::string_view text);
std::string serialize(const HostDescription& host);

/// SHA-256 over the serialized description.
std::string host_fingerprint(const HostDescription& host);

enum class Verdict { satisfied, unsatisfied, unknown_key };
std::string_view verdict_name(Verdict v) noexcept;

struct ConstraintResult {
  Constraint constraint;
  Verdict verdict = Verdict::unsatisfied;
  std::optional<Scalar> actual;
  std::string detail;
};

struct GateReport {
  std::vector<ConstraintResult> results;
  bool allow_unknown = false;

  bool passed() const noexcept;
  /// One line per failing constraint.
  std::string summary() const;
};

GateReport evaluate(std::span<const Constraint> constraints, const HostDescription& host,
                    bool allow_unknown = false);

/// Runs setup and teardown commands on the host.
class CommandRunner {
 public:
  virtual ~CommandRunner() = default;
  virtual ProcessResult run(const SetupCommand& cmd) = 0;
};

class HostCommandRunner : public CommandRunner {
 public:
  explicit HostCommandRunner(Counters* counters = nullptr, Millis timeout = Millis{0})
      : counters_(counters), timeout_(timeout) {}
  ProcessResult run(const SetupCommand& cmd) override;

 private:
  Counters* counters_;
  Millis timeout_;
};

enum class SetupMode { execute, dry_run };

struct CommandOutcome {
  std::size_t index = 0;
  SetupCommand command;
  bool executed = false;
  ExitStatus status;
  std::string output;

  bool ok() const noexcept { return !executed || status.success(); }
};

struct SetupReport {
  std::vector<CommandOutcome> entries;
};

/// Raised when a must_succeed command fails. The report holds every command
/// that ran, including the failing one.
class SetupError : public Error {
 public:
  SetupError(const std::string& message, SetupReport report)
      : Error(Errc::command_failed, message), report_(std::move(report)) {}
  const SetupReport& report() const noexcept { return report_; }

 private:
  SetupReport report_;
};

/// Runs commands in order. A command that cannot be started counts as a
/// failure with exit status 127.
SetupReport run_setup(std::span<const SetupCommand> cmds, SetupMode mode, CommandRunner& runner);

/// Teardown runs in reverse index order. Entry i, when the setup list has
/// an entry i, runs only if that setup command ran and succeeded; entries
/// beyond the setup list always run. Failures are recorded, never thrown.
SetupReport run_teardown(std::span<const SetupCommand> teardown, std::size_t setup_count,
                         std::span<const CommandOutcome> setup_done, SetupMode mode,
                         CommandRunner& runner);

}  // namespace dlspec
