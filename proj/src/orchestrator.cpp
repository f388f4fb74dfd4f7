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

#include "dlspec/orchestrator.hpp"

#include <stdlib.h>

#include <array>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "dlspec/digest.hpp"
#include "dlspec/parser.hpp"
#include "document.hpp"
#include "file_lock.hpp"

namespace dlspec {

namespace fs = std::filesystem;
using protocol::json;
using yaml::Node;

namespace {

constexpr std::array<std::string_view, 11> kActionNames = {
    "gate", "setup", "launch", "fetch-dataset", "list-elements", "load-stages",
    "fetch-model", "run", "post", "collect", "teardown"};

constexpr std::array<std::string_view, 4> kStatusNames = {"ok", "failed", "skipped", "planned"};

constexpr std::string_view kRecordKind = "run-record";
constexpr std::string_view kRecordSection = "run_record";

constexpr std::string_view kCacheTarget = "/dlspec/cache";
constexpr std::string_view kScratchTarget = "/dlspec/scratch";

std::string plural(std::size_t n, std::string_view word) {
  return std::to_string(n) + " " + std::string(word) + (n == 1 ? "" : "s");
}

std::string format_number(double v) { return scalar_text(Scalar{v}); }

json io_json(const std::vector<IOSpec>& specs) {
  json out = json::array();
  for (const auto& s : specs) {
    json j = {{"name", s.name}, {"element_type", std::string(element_type_name(s.element_type))}};
    if (s.shape) {
      json dims = json::array();
      for (const auto& d : *s.shape) dims.push_back(d ? json(*d) : json("*"));
      j["shape"] = dims;
    } else {
      j["shape"] = nullptr;
    }
    j["layout"] = s.layout ? json(*s.layout) : json(nullptr);
    out.push_back(j);
  }
  return out;
}

json scalar_json(const Scalar& s) {
  return std::visit([](const auto& v) { return json(v); }, s);
}

// Error category per step, used when the underlying error does not carry
// a more specific one.
Errc step_category(StepAction a) {
  switch (a) {
    case StepAction::gate: return Errc::gate_failed;
    case StepAction::setup: return Errc::command_failed;
    case StepAction::launch: return Errc::launch_failed;
    case StepAction::fetch_dataset:
    case StepAction::list_elements:
    case StepAction::fetch_model: return Errc::fetch_failed;
    default: return Errc::stage_failed;
  }
}

struct StepFailed {
  Errc cause;
  std::string message;
};

class Runner {
 public:
  Runner(const ExecutionPlan& p, const ExecuteOptions& o) : plan_(p), opts_(o) {
    if (!opts_.runner) {
      own_runner_ = std::make_unique<HostCommandRunner>(opts_.counters);
      runner_ = own_runner_.get();
    } else {
      runner_ = opts_.runner;
    }
  }

  RunRecord go() {
    const TaskBundle& b = plan_.bundle;
    record_.bundle = b.ids();
    record_.started_at = utc_timestamp_now();
    record_.dry_run = opts_.dry_run;
    record_.environment.backend = std::string(backend_name(opts_.backend));
    record_.environment.image = b.software.container_image;
    for (const auto& s : plan_.steps) {
      record_.steps.push_back({s.action, s.tags, StepStatus::skipped, 0, s.detail});
    }
    for (std::size_t i = 0; i < plan_.steps.size(); ++i) {
      const StepAction a = plan_.steps[i].action;
      if (a == StepAction::teardown) continue;
      if (record_.failure) break;
      if (opts_.dry_run && a != StepAction::gate) {
        record_.steps[i].status = StepStatus::planned;
        continue;
      }
      perform(i);
    }
    for (std::size_t i = 0; i < plan_.steps.size(); ++i) {
      if (plan_.steps[i].action == StepAction::teardown) {
        if (opts_.dry_run) {
          record_.steps[i].status = StepStatus::planned;
        } else {
          perform(i);
        }
      }
    }
    cleanup();
    return record_;
  }

 private:
  void perform(std::size_t i) {
    StepRecord& rec = record_.steps[i];
    const auto start = std::chrono::steady_clock::now();
    std::optional<StepFailed> failed;
    try {
      if (opts_.fail_at == rec.action) {
        throw Error(step_category(rec.action), "injected fault at " +
                                                   std::string(step_action_name(rec.action)));
      }
      rec.detail = dispatch(rec.action);
      rec.status = StepStatus::ok;
    } catch (const protocol::StageError& e) {
      merge_stages(e.completed());
      protocol::StageResult r;
      r.stage = e.stage();
      r.error = e.detail();
      record_.stages.push_back(r);
      failed = StepFailed{e.code(), e.what()};
    } catch (const Error& e) {
      failed = StepFailed{e.code(), e.what()};
    } catch (const std::exception& e) {
      failed = StepFailed{Errc::io, e.what()};
    }
    rec.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!failed) return;
    rec.status = StepStatus::failed;
    rec.detail = failed->message;
    // Teardown problems are reported on the step but do not fail the run.
    if (rec.action == StepAction::teardown || record_.failure) return;
    const Errc category = step_category(rec.action);
    record_.failure = RunFailure{rec.action, rec.tags, std::string(errc_name(category)),
                                 std::string(errc_name(failed->cause)), failed->message};
  }

  std::string dispatch(StepAction a) {
    switch (a) {
      case StepAction::gate: return gate();
      case StepAction::setup: return setup();
      case StepAction::launch: return launch_env();
      case StepAction::fetch_dataset: return fetch_dataset();
      case StepAction::list_elements: return list();
      case StepAction::load_stages: return load();
      case StepAction::fetch_model: return fetch_model();
      case StepAction::run: return run();
      case StepAction::post: return post();
      case StepAction::collect: return collect();
      case StepAction::teardown: return teardown();
    }
    return {};
  }

  std::string gate() {
    const HostDescription host = opts_.host ? *opts_.host : probe_host();
    record_.environment.host_digest = "sha256:" + host_fingerprint(host);
    const GateReport report = evaluate(plan_.bundle.hardware.constraints, host, opts_.allow_unknown);
    if (!report.passed()) throw Error(Errc::gate_failed, report.summary());
    return plural(report.results.size(), "constraint") + " satisfied";
  }

  std::string setup() {
    setup_started_ = true;
    try {
      setup_report_ = run_setup(plan_.bundle.hardware.setup, SetupMode::execute, *runner_);
    } catch (const SetupError& e) {
      setup_report_ = e.report();
      throw;
    }
    return plural(setup_report_.entries.size(), "command") + " ran";
  }

  std::string launch_env() {
    std::error_code ec;
    fs::create_directories(opts_.cache, ec);
    if (ec) throw Error(Errc::io, "cannot create cache " + opts_.cache.string() + ": " + ec.message());
    const fs::path parent = opts_.scratch_root.empty() ? fs::temp_directory_path() : opts_.scratch_root;
    fs::create_directories(parent, ec);
    std::string templ = (parent / "dlspec-scratch-XXXXXX").string();
    if (!::mkdtemp(templ.data())) throw Error(Errc::io, "cannot create scratch directory under " + parent.string());
    scratch_ = templ;

    ExecutionSpec spec;
    spec.backend = opts_.backend;
    spec.image = plan_.bundle.software.container_image;
    spec.env = plan_.bundle.software.env;
    spec.mounts = {{fs::absolute(opts_.cache), fs::path(kCacheTarget), true},
                   {scratch_, fs::path(kScratchTarget), false}};
    spec.workdir = opts_.backend == BackendKind::container ? fs::path(kScratchTarget) : scratch_;
    BackendOptions bo = opts_.backend_options;
    if (!bo.counters) bo.counters = opts_.counters;
    env_ = dlspec::launch(spec, bo);
    worker_ = &env_->start_worker(opts_.worker_cmd);
    return std::string(backend_name(opts_.backend)) + " environment " + env_->id();
  }

  ResourceFetcher& fetcher() {
    if (!fetcher_) {
      fetcher_ = std::make_unique<ResourceFetcher>(opts_.cache, opts_.counters, opts_.transport);
    }
    return *fetcher_;
  }

  std::string fetch_dataset() {
    dataset_paths_ = fetcher().fetch_all(plan_.bundle.dataset.resources, opts_.parallelism);
    return plural(dataset_paths_.size(), "resource") + " ready";
  }

  std::string list() {
    std::vector<std::string> names;
    for (const auto& r : plan_.bundle.dataset.resources) names.push_back(url_basename(r.url));
    const auto elements =
        list_elements(dataset_paths_, names, plan_.bundle.dataset.element_listing.glob);
    initial_data_.clear();
    for (const auto& e : elements) initial_data_.push_back(env_->map_path(e.path));
    return plural(initial_data_.size(), "element");
  }

  json context() {
    const TaskBundle& b = plan_.bundle;
    json manifests = json::object();
    for (Kind k : kAllKinds) manifests[std::string(kind_name(k))] = b.ids().at(k).to_string();
    json hyper = json::object();
    for (const auto& [k, v] : b.model.hyperparameters) hyper[k] = scalar_json(v);
    json artifacts = json::array();
    for (const auto& a : b.model.artifacts) {
      const fs::path p = a.unpack == Unpack::none ? fetcher().entry_path(a.checksum)
                                                  : fetcher().unpacked_path(a.checksum);
      artifacts.push_back(env_->map_path(p));
    }
    return {{"protocol_version", protocol::kVersion},
            {"manifests", manifests},
            {"task_kind", std::string(task_kind_name(b.model.task_kind))},
            {"inputs", io_json(b.model.inputs)},
            {"outputs", io_json(b.model.outputs)},
            {"hyperparameters", hyper},
            {"artifacts", artifacts},
            {"scratch_dir", env_->map_path(scratch_)},
            {"element_count", initial_data_.size()}};
  }

  std::string load() {
    worker_->load(plan_.bundle.model, context(), opts_.backend_options.reply_timeout);
    return "stages compiled";
  }

  std::string fetch_model() {
    const auto paths = fetcher().fetch_all(plan_.bundle.model.artifacts, opts_.parallelism);
    return plural(paths.size(), "artifact") + " ready";
  }

  std::string run() {
    try {
      result_ = worker_->run(initial_data_, opts_.output_cap, opts_.backend_options.reply_timeout);
    } catch (const protocol::StageError& e) {
      if (e.stage() != Stage::post_processing) throw;
      post_error_.emplace(e);
      merge_stages(e.completed());
      return "pre-processing and run completed";
    }
    return "pipeline completed";
  }

  std::string post() {
    if (post_error_) {
      const protocol::StageError e = *post_error_;
      post_error_.reset();
      throw protocol::StageError(e.code(), e.stage(), e.detail());
    }
    if (!result_) throw Error(Errc::stage_failed, "no result to post-process");
    const bool has_post = std::any_of(result_->stages.begin(), result_->stages.end(),
                                      [](const auto& s) { return s.stage == Stage::post_processing; });
    if (!has_post) throw Error(Errc::protocol_violation, "RESULT lacks a post_processing stage");
    return "output " + result_->final_output_digest;
  }

  std::string collect() {
    merge_stages(result_->stages);
    record_.final_output_digest = parse_checksum(result_->final_output_digest);
    record_.final_output_preview =
        result_->truncated ? std::string() : protocol::preview(result_->final_output);
    record_.metrics = result_->metrics;
    double total = 0;
    for (const auto& s : result_->stages) {
      record_.metrics[std::string(stage_name(s.stage)) + "_ms"] = s.wall_time_ms;
      total += s.wall_time_ms;
    }
    record_.metrics["pipeline_ms"] = total;
    return plural(record_.metrics.size(), "metric");
  }

  std::string teardown() {
    std::vector<std::string> notes;
    bool ok = true;
    if (setup_started_) {
      const SetupReport td =
          run_teardown(plan_.bundle.hardware.teardown, plan_.bundle.hardware.setup.size(),
                       setup_report_.entries, SetupMode::execute, *runner_);
      std::size_t ran = 0;
      for (const auto& e : td.entries) {
        if (e.executed) ++ran;
        if (!e.ok()) {
          ok = false;
          notes.push_back("teardown command " + std::to_string(e.index) + " " +
                          e.status.to_string());
        }
      }
      notes.insert(notes.begin(), plural(ran, "teardown command") + " ran");
    }
    if (env_) {
      const ExitReport r = env_->shutdown();
      std::string line = "environment stopped";
      if (r.worker) line += ", worker " + r.worker->to_string();
      notes.push_back(line);
      for (const auto& n : r.notes) {
        ok = false;
        notes.push_back(n);
      }
    }
    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
    if (!ok) throw Error(Errc::command_failed, detail);
    return detail.empty() ? std::string("nothing to tear down") : detail;
  }

  void cleanup() {
    if (env_ && env_->live()) env_->shutdown();
    if (!scratch_.empty()) {
      std::error_code ec;
      fs::remove_all(scratch_, ec);
    }
  }

  void merge_stages(const std::vector<protocol::StageResult>& stages) {
    for (const auto& s : stages) {
      auto it = std::find_if(record_.stages.begin(), record_.stages.end(),
                             [&](const auto& r) { return r.stage == s.stage; });
      if (it == record_.stages.end()) {
        record_.stages.push_back(s);
      } else {
        *it = s;
      }
    }
    std::sort(record_.stages.begin(), record_.stages.end(),
              [](const auto& a, const auto& b) { return a.stage < b.stage; });
  }

  const ExecutionPlan& plan_;
  const ExecuteOptions& opts_;
  CommandRunner* runner_ = nullptr;
  std::unique_ptr<CommandRunner> own_runner_;
  RunRecord record_;
  bool setup_started_ = false;
  SetupReport setup_report_;
  std::unique_ptr<Environment> env_;
  WorkerChannel* worker_ = nullptr;
  fs::path scratch_;
  std::unique_ptr<ResourceFetcher> fetcher_;
  std::vector<fs::path> dataset_paths_;
  std::vector<std::string> initial_data_;
  std::optional<protocol::RunResult> result_;
  std::optional<protocol::StageError> post_error_;
};

// Record text form --------------------------------------------------------

Node tags_node(const std::vector<int>& tags) {
  Node seq = Node::sequence();
  for (int t : tags) seq.push_back(Node::from(Scalar{std::int64_t{t}}));
  return seq;
}

std::vector<int> read_tags(const Node* n, const std::string& path, detail::Diagnostics& diag) {
  std::vector<int> tags;
  const Node* seq = detail::read_sequence(n, path, diag);
  if (!seq) return tags;
  for (std::size_t i = 0; i < seq->items().size(); ++i) {
    if (auto v = detail::read_int(&seq->items()[i], detail::index_path(path, i), diag)) {
      if (*v < 1 || *v > 12) {
        diag.add(detail::index_path(path, i), "invalid-value", "step tags run from 1 to 12");
      }
      tags.push_back(static_cast<int>(*v));
    }
  }
  return tags;
}

std::string compact_timestamp(const std::string& rfc3339) {
  std::string out;
  for (char c : rfc3339) {
    if (c != '-' && c != ':') out.push_back(c);
  }
  return out;
}

}  // namespace

// Plans ---------------------------------------------------------------------

std::string_view step_action_name(StepAction a) noexcept {
  return kActionNames[static_cast<std::size_t>(a)];
}

std::optional<StepAction> parse_step_action(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == text) return static_cast<StepAction>(i);
  }
  return std::nullopt;
}

std::string_view step_status_name(StepStatus s) noexcept {
  return kStatusNames[static_cast<std::size_t>(s)];
}

std::string circled(int tag) {
  if (tag < 1 || tag > 20) return "(" + std::to_string(tag) + ")";
  // U+2460 CIRCLED DIGIT ONE onwards.
  const unsigned cp = 0x2460 + static_cast<unsigned>(tag - 1);
  std::string out;
  out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
  out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
  out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  return out;
}

bool ExecutionPlan::contains(StepAction a) const noexcept {
  return std::any_of(steps.begin(), steps.end(), [a](const PlanStep& s) { return s.action == a; });
}

std::string ExecutionPlan::to_text() const {
  std::ostringstream out;
  for (const auto& s : steps) {
    std::string tags;
    for (int t : s.tags) tags += circled(t);
    // Circled digits are 3 bytes but one column wide.
    out << tags << std::string(s.tags.size() > 1 ? 1 : (s.tags.empty() ? 3 : 2), ' ')
        << std::left << std::setw(14) << step_action_name(s.action) << s.detail << "\n";
  }
  return out.str();
}

json ExecutionPlan::to_json() const {
  json steps_json = json::array();
  for (const auto& s : steps) {
    steps_json.push_back(
        {{"action", std::string(step_action_name(s.action))}, {"tags", s.tags}, {"detail", s.detail}});
  }
  json ids = json::object();
  for (Kind k : kAllKinds) ids[std::string(kind_name(k))] = bundle.ids().at(k).to_string();
  return {{"bundle", ids}, {"steps", steps_json}};
}

ExecutionPlan plan(const TaskBundle& b) {
  ExecutionPlan p;
  p.bundle = b;
  auto add = [&](StepAction a, std::vector<int> tags, std::string detail) {
    p.steps.push_back({a, std::move(tags), std::move(detail)});
  };
  add(StepAction::gate, {1}, b.hardware.id.to_string() + ": " +
                                 plural(b.hardware.constraints.size(), "constraint"));
  add(StepAction::setup, {2}, plural(b.hardware.setup.size(), "host command"));
  add(StepAction::launch, {3}, b.software.id.to_string() +
                                   (b.software.container_image.empty()
                                        ? std::string()
                                        : " image " + b.software.container_image));
  add(StepAction::fetch_dataset, {4, 5},
      b.dataset.id.to_string() + ": " + plural(b.dataset.resources.size(), "resource"));
  add(StepAction::list_elements, {6}, "glob " + b.dataset.element_listing.glob);
  add(StepAction::load_stages, {7}, b.model.id.to_string() + ": " +
                                        plural(b.model.inputs.size(), "input") + ", " +
                                        plural(b.model.outputs.size(), "output"));
  if (!b.model.artifacts.empty()) {
    const std::string detail = plural(b.model.artifacts.size(), "artifact");
    if (b.model.task_kind == TaskKind::inference) {
      add(StepAction::fetch_model, {8, 10}, detail);
    } else {
      add(StepAction::fetch_model, {}, detail);
    }
  }
  add(StepAction::run, {9}, std::string(task_kind_name(b.model.task_kind)));
  add(StepAction::post, {11, 12}, plural(b.model.outputs.size(), "output"));
  add(StepAction::collect, {}, "digest and metrics");
  add(StepAction::teardown, {}, plural(b.hardware.teardown.size(), "host command"));
  return p;
}

// Execution -----------------------------------------------------------------

RunRecord execute(const ExecutionPlan& p, const ExecuteOptions& opts) {
  return Runner(p, opts).go();
}

const StepRecord* RunRecord::step(StepAction a) const noexcept {
  for (const auto& s : steps) {
    if (s.action == a) return &s;
  }
  return nullptr;
}

std::optional<Errc> failure_errc(const RunRecord& r) {
  if (!r.failure) return std::nullopt;
  for (int i = 0; i <= static_cast<int>(Errc::fetch_failed); ++i) {
    if (errc_name(static_cast<Errc>(i)) == r.failure->code) return static_cast<Errc>(i);
  }
  return Errc::stage_failed;
}

std::string serialize(const RunRecord& r) {
  Node root = Node::mapping();
  root.set("kind", Node::scalar(std::string(kRecordKind)));
  Node sec = Node::mapping();
  Node bundle = Node::mapping();
  for (Kind k : kAllKinds) bundle.set(std::string(kind_name(k)), Node::scalar(r.bundle.at(k).to_string()));
  sec.set("bundle", std::move(bundle));
  sec.set("started_at", Node::scalar(r.started_at));
  sec.set("dry_run", Node::from(Scalar{r.dry_run}));
  sec.set("status", Node::scalar(r.dry_run ? "planned" : (r.failure ? "failed" : "succeeded")));
  Node env = Node::mapping();
  env.set("backend", Node::scalar(r.environment.backend));
  env.set("image", Node::scalar(r.environment.image));
  env.set("host_digest", Node::scalar(r.environment.host_digest));
  sec.set("environment", std::move(env));
  Node steps = Node::sequence();
  for (const auto& s : r.steps) {
    Node n = Node::mapping();
    n.set("action", Node::scalar(std::string(step_action_name(s.action))));
    n.set("tags", tags_node(s.tags));
    n.set("status", Node::scalar(std::string(step_status_name(s.status))));
    n.set("duration_ms", Node::from(Scalar{s.duration_ms}));
    n.set("detail", Node::scalar(s.detail));
    steps.push_back(std::move(n));
  }
  sec.set("steps", std::move(steps));
  Node stages = Node::sequence();
  for (const auto& s : r.stages) {
    Node n = Node::mapping();
    n.set("stage", Node::scalar(std::string(stage_name(s.stage))));
    n.set("wall_time_ms", Node::from(Scalar{s.wall_time_ms}));
    if (s.output_digest) n.set("output_digest", Node::scalar(*s.output_digest));
    n.set("preview", Node::scalar(s.preview));
    if (s.error) n.set("error", Node::scalar(*s.error));
    stages.push_back(std::move(n));
  }
  sec.set("stages", std::move(stages));
  if (r.final_output_digest) {
    sec.set("final_output_digest", Node::scalar(r.final_output_digest->to_string()));
  }
  sec.set("final_output_preview", Node::scalar(r.final_output_preview));
  Node metrics = Node::mapping();
  for (const auto& [k, v] : r.metrics) metrics.set(k, Node::from(Scalar{v}));
  sec.set("metrics", std::move(metrics));
  if (r.failure) {
    Node f = Node::mapping();
    f.set("step", Node::scalar(std::string(step_action_name(r.failure->step))));
    f.set("tags", tags_node(r.failure->tags));
    f.set("code", Node::scalar(r.failure->code));
    f.set("cause", Node::scalar(r.failure->cause));
    f.set("message", Node::scalar(r.failure->message));
    sec.set("failure", std::move(f));
  }
  root.set(std::string(kRecordSection), std::move(sec));
  return yaml::emit(root);
}

RunRecord parse_run_record(std::string_view text) {
  using detail::MapReader;
  detail::Diagnostics diag;
  RunRecord r;
  const auto tree = detail::parse_tree(text, diag);
  if (!tree) {
    detail::throw_if_errors(diag);
    return r;
  }
  MapReader root = detail::open_document(*tree, kRecordKind, diag);
  if (!root.ok()) {
    detail::throw_if_errors(diag);
    return r;
  }
  MapReader sec(root.required(kRecordSection), std::string(kRecordSection), diag);
  MapReader bundle(sec.required("bundle"), sec.child("bundle"), diag);
  for (Kind k : kAllKinds) {
    const std::string path = bundle.child(kind_name(k));
    if (auto s = detail::read_string(bundle.required(kind_name(k)), path, diag)) {
      try {
        r.bundle.at(k) = parse_manifest_id(*s);
        if (r.bundle.at(k).kind != k) diag.add(path, "invalid-value", "wrong kind in '" + *s + "'");
      } catch (const Error& e) {
        diag.add(path, "invalid-value", e.what());
      }
    }
  }
  bundle.finish();
  if (auto s = detail::read_string(sec.required("started_at"), sec.child("started_at"), diag)) {
    r.started_at = *s;
  }
  if (auto b = detail::read_bool(sec.optional("dry_run"), sec.child("dry_run"), diag)) r.dry_run = *b;
  std::string status;
  if (auto s = detail::read_string(sec.required("status"), sec.child("status"), diag)) status = *s;
  MapReader env(sec.optional("environment"), sec.child("environment"), diag);
  if (env.ok()) {
    auto str = [&](const char* key, std::string& out) {
      if (auto s = detail::read_string(env.optional(key), env.child(key), diag)) out = *s;
    };
    str("backend", r.environment.backend);
    str("image", r.environment.image);
    str("host_digest", r.environment.host_digest);
    env.finish();
  }
  if (const Node* steps = detail::read_sequence(sec.required("steps"), sec.child("steps"), diag)) {
    for (std::size_t i = 0; i < steps->items().size(); ++i) {
      const std::string path = detail::index_path(sec.child("steps"), i);
      MapReader s(&steps->items()[i], path, diag);
      StepRecord rec;
      if (auto a = detail::read_string(s.required("action"), s.child("action"), diag)) {
        if (auto act = parse_step_action(*a)) {
          rec.action = *act;
        } else {
          diag.add(s.child("action"), "invalid-value", "unknown step '" + *a + "'");
        }
      }
      rec.tags = read_tags(s.optional("tags"), s.child("tags"), diag);
      if (auto st = detail::read_string(s.required("status"), s.child("status"), diag)) {
        auto it = std::find(kStatusNames.begin(), kStatusNames.end(), *st);
        if (it == kStatusNames.end()) {
          diag.add(s.child("status"), "invalid-value", "unknown status '" + *st + "'");
        } else {
          rec.status = static_cast<StepStatus>(it - kStatusNames.begin());
        }
      }
      if (auto d = detail::read_number(s.optional("duration_ms"), s.child("duration_ms"), diag)) {
        rec.duration_ms = *d;
      }
      if (auto d = detail::read_string(s.optional("detail"), s.child("detail"), diag)) rec.detail = *d;
      s.finish();
      r.steps.push_back(std::move(rec));
    }
  }
  if (const Node* stages = detail::read_sequence(sec.optional("stages"), sec.child("stages"), diag)) {
    for (std::size_t i = 0; i < stages->items().size(); ++i) {
      const std::string path = detail::index_path(sec.child("stages"), i);
      MapReader s(&stages->items()[i], path, diag);
      protocol::StageResult res;
      if (auto n = detail::read_string(s.required("stage"), s.child("stage"), diag)) {
        if (auto st = parse_stage(*n)) {
          res.stage = *st;
        } else {
          diag.add(s.child("stage"), "invalid-value", "unknown stage '" + *n + "'");
        }
      }
      if (auto w = detail::read_number(s.required("wall_time_ms"), s.child("wall_time_ms"), diag)) {
        res.wall_time_ms = *w;
      }
      if (const Node* d = s.optional("output_digest")) {
        res.output_digest = detail::read_string(d, s.child("output_digest"), diag);
      }
      if (auto p = detail::read_string(s.optional("preview"), s.child("preview"), diag)) res.preview = *p;
      if (const Node* e = s.optional("error")) res.error = detail::read_string(e, s.child("error"), diag);
      s.finish();
      r.stages.push_back(std::move(res));
    }
  }
  if (const Node* d = sec.optional("final_output_digest")) {
    if (auto s = detail::read_string(d, sec.child("final_output_digest"), diag)) {
      try {
        r.final_output_digest = parse_checksum(*s);
      } catch (const Error& e) {
        diag.add(sec.child("final_output_digest"), "invalid-checksum", e.what());
      }
    }
  }
  if (auto p = detail::read_string(sec.optional("final_output_preview"),
                                   sec.child("final_output_preview"), diag)) {
    r.final_output_preview = *p;
  }
  MapReader metrics(sec.required("metrics"), sec.child("metrics"), diag);
  if (metrics.ok()) {
    for (const auto& e : metrics.entries()) {
      if (auto v = detail::read_number(&e.value, metrics.child(e.key), diag)) r.metrics[e.key] = *v;
    }
  }
  MapReader f(sec.optional("failure"), sec.child("failure"), diag);
  if (f.ok()) {
    RunFailure fail;
    if (auto a = detail::read_string(f.required("step"), f.child("step"), diag)) {
      if (auto act = parse_step_action(*a)) {
        fail.step = *act;
      } else {
        diag.add(f.child("step"), "invalid-value", "unknown step '" + *a + "'");
      }
    }
    fail.tags = read_tags(f.optional("tags"), f.child("tags"), diag);
    auto str = [&](const char* key, std::string& out, bool required) {
      const Node* n = required ? f.required(key) : f.optional(key);
      if (auto s = detail::read_string(n, f.child(key), diag)) out = *s;
    };
    str("code", fail.code, true);
    str("cause", fail.cause, false);
    str("message", fail.message, false);
    f.finish();
    r.failure = std::move(fail);
  }
  sec.finish();
  root.finish();
  const std::string expected = r.dry_run ? "planned" : (r.failure ? "failed" : "succeeded");
  if (!status.empty() && status != expected) {
    diag.add(sec.child("status"), "invalid-value",
             "status '" + status + "' contradicts the record (expected '" + expected + "')");
  }
  detail::throw_if_errors(diag);
  return r;
}

fs::path persist_record(const RunRecord& record, const fs::path& run_dir) {
  const std::string text = serialize(record);
  const std::string stamp = compact_timestamp(record.started_at.empty() ? utc_timestamp_now()
                                                                       : record.started_at);
  const fs::path dir = run_dir / (stamp + "-" + sha256_hex(text).substr(0, 12));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  const fs::path file = dir / kRecordFileName;
  detail::write_atomically(file, text);
  return file;
}

// Reference logs ------------------------------------------------------------

ReferenceLog emit_reference_log(const RunRecord& record,
                                const std::map<std::string, Scalar>& author_info,
                                std::string created_at) {
  if (record.dry_run) throw Error(Errc::record_failed, "a dry run has no results to publish");
  if (record.failure) {
    throw Error(Errc::record_failed, "cannot publish a failed run (" + record.failure->code +
                                         " at " + std::string(step_action_name(record.failure->step)) +
                                         ")");
  }
  ReferenceLog log;
  log.bundle = record.bundle;
  log.metrics = record.metrics;
  log.expected_outputs = record.final_output_digest;
  log.author_info = author_info;
  log.created_at = std::move(created_at);
  return log;
}

bool is_time_like_metric(std::string_view name) noexcept {
  auto ends = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.substr(name.size() - suffix.size()) == suffix;
  };
  for (std::string_view s : {"_ms", "_us", "_ns", "_s", "_seconds"}) {
    if (ends(s)) return true;
  }
  return name.find("latency") != std::string_view::npos || name.find("time") != std::string_view::npos;
}

std::string_view outcome_name(FieldComparison::Outcome o) noexcept {
  switch (o) {
    case FieldComparison::Outcome::pass: return "pass";
    case FieldComparison::Outcome::fail: return "fail";
    case FieldComparison::Outcome::skipped: return "skipped";
    case FieldComparison::Outcome::info: return "info";
  }
  return "fail";
}

bool ComparisonReport::passed() const noexcept {
  return std::none_of(fields.begin(), fields.end(), [](const FieldComparison& f) {
    return f.outcome == FieldComparison::Outcome::fail;
  });
}

std::string ComparisonReport::to_text() const {
  std::ostringstream out;
  std::size_t width = 5;
  for (const auto& f : fields) width = std::max(width, f.field.size());
  out << std::left << std::setw(static_cast<int>(width)) << "field" << "  "
      << std::setw(8) << "result" << "expected / achieved\n";
  for (const auto& f : fields) {
    out << std::setw(static_cast<int>(width)) << f.field << "  " << std::setw(8)
        << outcome_name(f.outcome) << f.expected << " / " << f.achieved;
    if (f.delta) out << "  delta " << format_number(*f.delta);
    if (f.tolerance) out << " tol " << format_number(*f.tolerance);
    if (!f.note.empty()) out << "  (" << f.note << ")";
    out << "\n";
  }
  out << (passed() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

json ComparisonReport::to_json() const {
  json arr = json::array();
  for (const auto& f : fields) {
    json j = {{"field", f.field},
              {"outcome", std::string(outcome_name(f.outcome))},
              {"expected", f.expected},
              {"achieved", f.achieved}};
    j["delta"] = f.delta && std::isfinite(*f.delta) ? json(*f.delta) : json(nullptr);
    j["tolerance"] = f.tolerance ? json(*f.tolerance) : json(nullptr);
    if (!f.note.empty()) j["note"] = f.note;
    arr.push_back(j);
  }
  return {{"passed", passed()}, {"fields", arr}};
}

ComparisonReport compare_logs(const RunRecord& achieved, const ReferenceLog& reference,
                              const std::map<std::string, double>& tolerances) {
  using O = FieldComparison::Outcome;
  ComparisonReport rep;
  {
    FieldComparison f{"run", achieved.succeeded() ? O::pass : O::fail, "succeeded",
                      achieved.dry_run ? "planned" : (achieved.failure ? "failed" : "succeeded"),
                      {}, {}, {}};
    if (achieved.failure) f.note = achieved.failure->code + " at " + std::string(step_action_name(achieved.failure->step));
    rep.fields.push_back(std::move(f));
  }
  for (Kind k : kAllKinds) {
    const std::string e = reference.bundle.at(k).to_string();
    const std::string a = achieved.bundle.at(k).to_string();
    rep.fields.push_back({"bundle." + std::string(kind_name(k)), e == a ? O::pass : O::fail, e, a,
                          {}, {}, {}});
  }
  for (const auto& [name, expected] : reference.metrics) {
    FieldComparison f;
    f.field = "metrics." + name;
    f.expected = format_number(expected);
    auto it = achieved.metrics.find(name);
    auto tol = tolerances.find(name);
    if (it == achieved.metrics.end()) {
      f.outcome = O::fail;
      f.achieved = "(absent)";
      f.note = "metric missing from the run";
    } else {
      f.achieved = format_number(it->second);
      f.delta = it->second - expected;
      if (tol == tolerances.end() && is_time_like_metric(name)) {
        f.outcome = O::skipped;
        f.note = "time-like; give a tolerance to check";
      } else {
        f.tolerance = tol == tolerances.end() ? kDefaultMetricTolerance : tol->second;
        f.outcome = std::fabs(*f.delta) <= *f.tolerance ? O::pass : O::fail;
      }
    }
    rep.fields.push_back(std::move(f));
  }
  for (const auto& [name, value] : achieved.metrics) {
    if (reference.metrics.count(name)) continue;
    rep.fields.push_back({"metrics." + name, O::info, "(absent)", format_number(value), {}, {},
                          "not in the reference log"});
  }
  {
    FieldComparison f;
    f.field = "expected_outputs";
    f.achieved = achieved.final_output_digest ? achieved.final_output_digest->to_string() : "(none)";
    if (reference.expected_outputs) {
      f.expected = reference.expected_outputs->to_string();
      f.outcome = achieved.final_output_digest == reference.expected_outputs ? O::pass : O::fail;
    } else {
      f.expected = "(none)";
      f.outcome = O::info;
      f.note = "reference log has no expected output digest";
    }
    rep.fields.push_back(std::move(f));
  }
  return rep;
}

}  // namespace dlspec
