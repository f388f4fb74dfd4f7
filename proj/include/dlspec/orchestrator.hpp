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

// Runtime flow for one task bundle: plan, execute, record, compare.
//
// Step tags follow the numbered runtime walkthrough:
//   gate(1) setup(2) launch(3) fetch-dataset(4,5) list-elements(6)
//   load-stages(7) fetch-model(8,10) run(9) post(11,12)
// collect and teardown carry no tag. A step's leading tag orders it.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlspec/backend.hpp"
#include "dlspec/counters.hpp"
#include "dlspec/fetcher.hpp"
#include "dlspec/gate.hpp"
#include "dlspec/manifest.hpp"
#include "dlspec/protocol.hpp"

namespace dlspec {

enum class StepAction {
  gate,
  setup,
  launch,
  fetch_dataset,
  list_elements,
  load_stages,
  fetch_model,
  run,
  post,
  collect,
  teardown,
};

std::string_view step_action_name(StepAction a) noexcept;
std::optional<StepAction> parse_step_action(std::string_view text) noexcept;

/// "①" … "⑫"
std::string circled(int tag);

struct PlanStep {
  StepAction action = StepAction::gate;
  std::vector<int> tags;
  std::string detail;

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct ExecutionPlan {
  TaskBundle bundle;
  std::vector<PlanStep> steps;

  bool contains(StepAction a) const noexcept;
  /// One line per step, tags first.
  std::string to_text() const;
  protocol::json to_json() const;

  friend bool operator==(const ExecutionPlan&, const ExecutionPlan&) = default;
};

ExecutionPlan plan(const TaskBundle& bundle);

enum class StepStatus { ok, failed, skipped, planned };

std::string_view step_status_name(StepStatus s) noexcept;

struct StepRecord {
  StepAction action = StepAction::gate;
  std::vector<int> tags;
  StepStatus status = StepStatus::skipped;
  double duration_ms = 0;
  std::string detail;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct RunFailure {
  StepAction step = StepAction::gate;
  std::vector<int> tags;
  std::string code;   // gate-failed, command-failed, launch-failed, fetch-failed, stage-failed
  std::string cause;  // the underlying error code
  std::string message;

  friend bool operator==(const RunFailure&, const RunFailure&) = default;
};

struct EnvironmentFingerprint {
  std::string backend;
  std::string image;
  std::string host_digest;

  friend bool operator==(const EnvironmentFingerprint&, const EnvironmentFingerprint&) = default;
};

struct RunRecord {
  BundleIds bundle;
  std::string started_at;
  bool dry_run = false;
  std::vector<StepRecord> steps;
  std::vector<protocol::StageResult> stages;
  std::optional<Checksum> final_output_digest;
  std::string final_output_preview;
  std::map<std::string, double> metrics;
  EnvironmentFingerprint environment;
  std::optional<RunFailure> failure;

  bool succeeded() const noexcept { return !failure && !dry_run; }
  const StepRecord* step(StepAction a) const noexcept;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// `failure.code` as an Errc, for exit-code mapping.
std::optional<Errc> failure_errc(const RunRecord& r);

std::string serialize(const RunRecord& record);
/// Throws ManifestError.
RunRecord parse_run_record(std::string_view text);

/// Writes `<run_dir>/<timestamp>-<short-digest>/record.dlspec.yml` and
/// returns its path.
std::filesystem::path persist_record(const RunRecord& record, const std::filesystem::path& run_dir);

inline constexpr std::string_view kRecordFileName = "record.dlspec.yml";
inline constexpr std::string_view kReferenceLogFileName = "reference-log.dlspec.yml";

struct ExecuteOptions {
  std::filesystem::path cache;
  BackendKind backend = BackendKind::process;
  BackendOptions backend_options;
  std::vector<std::string> worker_cmd = {"dlspec-stage-host"};
  /// Declared host; probed when absent.
  std::optional<HostDescription> host;
  bool allow_unknown = false;
  bool dry_run = false;
  Counters* counters = nullptr;
  /// Setup and teardown runner; a HostCommandRunner when null.
  CommandRunner* runner = nullptr;
  std::shared_ptr<Transport> transport;
  unsigned parallelism = 4;
  std::size_t output_cap = protocol::kDefaultOutputCap;
  /// Scratch parent; a fresh directory is created beneath and removed.
  std::filesystem::path scratch_root;
  /// Fault injection for tests: the named step fails on entry.
  std::optional<StepAction> fail_at;
};

/// Never throws for step failures; they end up in RunRecord::failure.
/// Teardown and environment shutdown always run once launch was reached.
RunRecord execute(const ExecutionPlan& plan, const ExecuteOptions& opts);

/// Throws Error(record_failed) for failed or dry runs.
ReferenceLog emit_reference_log(const RunRecord& record,
                                const std::map<std::string, Scalar>& author_info,
                                std::string created_at = utc_timestamp_now());

/// Metrics whose name ends in _ms, _us, _ns, _s or _seconds, or contains
/// "latency" or "time", are skipped unless a tolerance is given.
bool is_time_like_metric(std::string_view name) noexcept;
inline constexpr double kDefaultMetricTolerance = 1e-6;

struct FieldComparison {
  enum class Outcome { pass, fail, skipped, info };
  std::string field;
  Outcome outcome = Outcome::pass;
  std::string expected;
  std::string achieved;
  std::optional<double> delta;
  std::optional<double> tolerance;
  std::string note;
};

std::string_view outcome_name(FieldComparison::Outcome o) noexcept;

struct ComparisonReport {
  std::vector<FieldComparison> fields;

  bool passed() const noexcept;
  std::string to_text() const;
  protocol::json to_json() const;
};

ComparisonReport compare_logs(const RunRecord& achieved, const ReferenceLog& reference,
                              const std::map<std::string, double>& tolerances = {});

}  // namespace dlspec
