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

#include "dlspec/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dlspec/backend.hpp"
#include "dlspec/fetcher.hpp"
#include "dlspec/gate.hpp"
#include "dlspec/orchestrator.hpp"
#include "dlspec/parser.hpp"
#include "dlspec/registry.hpp"

namespace dlspec {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersionString = "0.1.0";
constexpr std::string_view kSuffix = ".dlspec.yml";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Global {
  std::string registry;
  std::string cache;
  std::string backend = "container";
  std::string engine;
  std::vector<std::string> engine_args;
  std::string worker_cmd;
  std::string host_file;
  std::string format = "text";
  bool allow_unknown = false;

  bool as_json() const { return format == "json"; }
};

struct BundleArgs {
  std::string file;
  std::string hardware, software, dataset, model;

  bool any() const {
    return !file.empty() || !hardware.empty() || !software.empty() || !dataset.empty() ||
           !model.empty();
  }
  const std::string& flag(Kind k) const {
    switch (k) {
      case Kind::hardware: return hardware;
      case Kind::software: return software;
      case Kind::dataset: return dataset;
      case Kind::model: return model;
    }
    return hardware;
  }
};

constexpr Kind kKinds[] = {Kind::hardware, Kind::software, Kind::dataset, Kind::model};

fs::path home_default(const char* leaf) {
  const char* home = std::getenv("HOME");
  return (home && *home ? fs::path(home) / ".dlspec" : fs::path(".dlspec")) / leaf;
}

std::string read_input(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) throw UsageError("cannot read " + path.string() + ": is a directory");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  if (in.bad()) throw UsageError("cannot read " + path.string());
  return s.str();
}

std::pair<std::string, std::string> split_pair(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError(std::string(flag) + " expects key=value, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

Scalar scalar_from_text(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec == std::errc() && p == v.data() + v.size() && !v.empty()) return i;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (!v.empty() && end == v.c_str() + v.size()) return d;
  return v;
}

double number_from_text(const std::string& v, const char* flag) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !(d >= 0)) {
    throw UsageError(std::string(flag) + " expects a non-negative number, got '" + v + "'");
  }
  return d;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

json counters_json(const Counters& c) {
  return {{"fetch_requests", c.fetch_requests.load()},
          {"transfers", c.transfers.load()},
          {"cache_hits", c.cache_hits.load()},
          {"evictions", c.evictions.load()},
          {"launches", c.launches.load()},
          {"engine_invocations", c.engine_invocations.load()},
          {"setup_commands", c.setup_commands.load()},
          {"stage_runs", c.stage_runs.load()}};
}

json violation_json(const std::string& file, const Violation& v) {
  return {{"file", file},
          {"path", v.path},
          {"code", v.code},
          {"message", v.message},
          {"severity", std::string(severity_name(v.severity))}};
}

std::string violation_line(const std::string& file, const Violation& v) {
  return file + ":" + v.path + ":" + v.code + ":" + v.message;
}

/// Error raised while reading a named input, so diagnostics can name it.
struct SourcedManifestError : ManifestError {
  SourcedManifestError(std::string src, std::vector<Violation> v)
      : ManifestError(std::move(v)), source(std::move(src)) {}
  std::string source;
};

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err, const CliHooks& hooks)
      : out_(out), err_(err), hooks_(hooks) {
    counters_ = hooks.counters ? hooks.counters : &own_counters_;
  }

  int main(const std::vector<std::string>& args) {
    CLI::App app{"Manifests and runtime for reproducible deep learning tasks", "dlspec"};
    app.set_version_flag("--version", kVersionString);
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--registry", g_.registry, "Registry root directory")->envname("DLSPEC_REGISTRY");
    app.add_option("--cache", g_.cache, "Resource cache directory")->envname("DLSPEC_CACHE");
    app.add_option("--backend", g_.backend, "Execution backend")
        ->check(CLI::IsMember({"container", "process"}))
        ->capture_default_str();
    app.add_option("--engine", g_.engine, "Container engine name or path");
    app.add_option("--engine-arg", g_.engine_args, "Extra argument for the engine run command")
        ->allow_extra_args(false);
    app.add_option("--worker-cmd", g_.worker_cmd,
                   "Stage worker command, split on whitespace (default dlspec-stage-host)");
    app.add_option("--host-file", g_.host_file, "Declared host description instead of probing");
    app.add_option("--format", g_.format, "Output format")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    app.add_flag("--allow-unknown", g_.allow_unknown,
                 "Treat constraints on keys the host lacks as satisfied");

    std::vector<std::string> paths;
    auto* validate = app.add_subcommand("validate", "Check manifests, reference logs and bundle files");
    validate->add_option("paths", paths, "Files or directories")->required();

    std::vector<std::string> refs;
    BundleArgs bundle;
    auto add_bundle = [&](CLI::App* sub, bool positional_file) {
      sub->add_option(positional_file ? "bundle,--bundle" : "--bundle", bundle.file, "Bundle file");
      sub->add_option("--hardware", bundle.hardware, "hardware ref or manifest file");
      sub->add_option("--software", bundle.software, "software ref or manifest file");
      sub->add_option("--dataset", bundle.dataset, "dataset ref or manifest file");
      sub->add_option("--model", bundle.model, "model ref or manifest file");
    };

    auto* resolve = app.add_subcommand("resolve", "Resolve refs against the registry");
    resolve->add_option("refs", refs, "kind:name@range refs");
    add_bundle(resolve, false);

    std::vector<std::string> publish_paths;
    auto* publish = app.add_subcommand("publish", "Store manifests in the registry");
    publish->add_option("paths", publish_paths, "Manifest files or directories")->required();

    auto* fetch = app.add_subcommand("fetch", "Fetch dataset and model resources into the cache");
    fetch->add_option("refs", refs, "dataset or model refs");
    add_bundle(fetch, false);

    bool dry_run = false, emit = false;
    std::vector<std::string> authors;
    std::string run_dir;
    auto* run = app.add_subcommand("run", "Execute a task bundle");
    add_bundle(run, true);
    run->add_flag("--dry-run", dry_run, "Evaluate the gate and print the plan");
    run->add_flag("--emit-reference-log", emit, "Write a reference log beside the record");
    run->add_option("--author", authors, "Author info key=value for the reference log")
        ->allow_extra_args(false);
    run->add_option("--run-dir", run_dir, "Directory for run records");

    std::string record_path, reference_path;
    std::vector<std::string> tols;
    auto* compare = app.add_subcommand("compare", "Compare a run record with a reference log");
    compare->add_option("record", record_path, "Run record file or run directory")->required();
    compare->add_option("reference", reference_path, "Reference log file")->required();
    compare->add_option("--tol", tols, "Metric tolerance name=value")->allow_extra_args(false);

    auto* probe = app.add_subcommand("probe", "Describe the host, optionally checking hardware");
    probe->add_option("--hardware", bundle.hardware, "hardware ref or manifest file to check");

    try {
      std::vector<std::string> rev(args.rbegin(), args.rend());
      app.parse(rev);
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e, out_, err_);
      return rc == 0 ? exit_code::ok : exit_code::usage;
    }

    return guarded([&] {
      if (!g_.registry.empty()) registry_root_ = g_.registry;
      else registry_root_ = home_default("registry");
      if (!g_.cache.empty()) cache_root_ = g_.cache;
      else cache_root_ = home_default("cache");

      if (*validate) return cmd_validate(paths);
      if (*resolve) return cmd_resolve(refs, bundle);
      if (*publish) return cmd_publish(publish_paths);
      if (*fetch) return cmd_fetch(refs, bundle);
      if (*run) {
        return cmd_run(bundle, dry_run, emit, authors,
                       run_dir.empty() ? home_default("runs") : fs::path(run_dir));
      }
      if (*compare) return cmd_compare(record_path, reference_path, tols);
      if (*probe) return cmd_probe(bundle.hardware);
      throw UsageError("no command");
    });
  }

 private:
  template <typename F>
  int guarded(F&& f) {
    try {
      return f();
    } catch (const UsageError& e) {
      return fail(exit_code::usage, "usage", e.what());
    } catch (const SourcedManifestError& e) {
      return fail_violations(e.source, e.violations());
    } catch (const ManifestError& e) {
      return fail_violations("<input>", e.violations());
    } catch (const Error& e) {
      return fail(exit_code_for(e.code()), std::string(errc_name(e.code())), e.what());
    } catch (const std::exception& e) {
      return fail(exit_code::execution, "internal", e.what());
    }
  }

  int fail(int rc, const std::string& code, const std::string& message) {
    if (g_.as_json()) {
      out_ << json{{"error", {{"code", code}, {"message", message}, {"exit_code", rc}}}}.dump(2)
           << "\n";
    }
    err_ << "dlspec: " << code << ": " << message << "\n";
    return rc;
  }

  int fail_violations(const std::string& source, const std::vector<Violation>& vs) {
    json arr = json::array();
    for (const auto& v : vs) {
      arr.push_back(violation_json(source, v));
      err_ << violation_line(source, v) << "\n";
    }
    if (g_.as_json()) {
      out_ << json{{"error", {{"code", "invalid-manifest"},
                              {"violations", arr},
                              {"exit_code", exit_code::validation}}}}.dump(2)
           << "\n";
    }
    return exit_code::validation;
  }

  // Directories expand to their *.dlspec.yml files, sorted.
  static std::vector<fs::path> expand(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
      std::error_code ec;
      if (!fs::is_directory(in, ec)) {
        out.emplace_back(in);
        continue;
      }
      std::vector<fs::path> found;
      for (auto it = fs::recursive_directory_iterator(in, ec); !ec && it != fs::end(it);
           it.increment(ec)) {
        const std::string name = it->path().filename().string();
        if (it->is_regular_file(ec) && name.size() > kSuffix.size() &&
            name.compare(name.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
          found.push_back(it->path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    }
    return out;
  }

  static std::vector<Violation> check_text(std::string_view text) {
    const std::string kind = peek_kind(text);
    try {
      if (kind == "bundle") {
        parse_bundle_file(text);
        return {};
      }
      if (kind == "host") {
        parse_host_file(text);
        return {};
      }
      if (kind == "run-record") {
        parse_run_record(text);
        return {};
      }
    } catch (const ManifestError& e) {
      return e.violations();
    }
    return lint(text);
  }

  int cmd_validate(const std::vector<std::string>& inputs) {
    bool unreadable = false, errors = false;
    json arr = json::array();
    for (const auto& path : expand(inputs)) {
      std::string text;
      try {
        text = read_input(path);
      } catch (const UsageError& e) {
        err_ << "dlspec: usage: " << e.what() << "\n";
        unreadable = true;
        continue;
      }
      const auto vs = check_text(text);
      if (has_errors(vs)) errors = true;
      for (const auto& v : vs) {
        if (g_.as_json()) {
          arr.push_back(violation_json(path.string(), v));
        } else {
          out_ << violation_line(path.string(), v) << "\n";
        }
      }
    }
    if (g_.as_json()) out_ << arr.dump(2) << "\n";
    if (unreadable) return exit_code::usage;
    return errors ? exit_code::validation : exit_code::ok;
  }

  Manifest load_manifest_file(const fs::path& path) {
    const std::string text = read_input(path);
    Manifest m;
    try {
      m = parse_manifest(text);
    } catch (const ManifestError& e) {
      throw SourcedManifestError(path.string(), e.violations());
    }
    auto vs = validate(m);
    if (has_errors(vs)) throw SourcedManifestError(path.string(), std::move(vs));
    return m;
  }

  Manifest load_one(const std::string& text, std::optional<Kind> kind) {
    std::error_code ec;
    if (fs::is_regular_file(text, ec)) {
      Manifest m = load_manifest_file(text);
      if (kind && manifest_kind(m) != *kind) {
        throw Error(Errc::bundle_kinds, text + " is a " + std::string(kind_name(manifest_kind(m))) +
                                            " manifest, expected " +
                                            std::string(kind_name(*kind)));
      }
      return m;
    }
    return Registry(registry_root_).resolve(parse_manifest_ref(text, kind));
  }

  TaskBundle load_bundle(const BundleArgs& b) {
    std::map<Kind, std::string> specs;
    if (!b.file.empty()) {
      const std::string text = read_input(b.file);
      std::vector<ManifestRef> refs;
      try {
        refs = parse_bundle_file(text);
      } catch (const ManifestError& e) {
        throw SourcedManifestError(b.file, e.violations());
      }
      for (const auto& r : refs) specs[r.kind] = r.to_string();
    }
    for (Kind k : kKinds) {
      if (!b.flag(k).empty()) specs[k] = b.flag(k);
    }
    std::vector<std::string> missing;
    for (Kind k : kKinds) {
      if (!specs.count(k)) missing.push_back("--" + std::string(kind_name(k)));
    }
    if (!missing.empty()) {
      std::string msg = "bundle is missing";
      for (const auto& m : missing) msg += " " + m;
      throw UsageError(msg + "; pass a bundle file or all four kind flags");
    }
    TaskBundle t;
    t.hardware = std::get<HardwareManifest>(load_one(specs[Kind::hardware], Kind::hardware));
    t.software = std::get<SoftwareManifest>(load_one(specs[Kind::software], Kind::software));
    t.dataset = std::get<DatasetManifest>(load_one(specs[Kind::dataset], Kind::dataset));
    t.model = std::get<ModelManifest>(load_one(specs[Kind::model], Kind::model));
    auto vs = validate_bundle(t);
    if (has_errors(vs)) throw SourcedManifestError("<bundle>", std::move(vs));
    return t;
  }

  int cmd_resolve(const std::vector<std::string>& refs, const BundleArgs& b) {
    if (refs.empty() && !b.any()) throw UsageError("resolve needs refs or a bundle");
    std::vector<std::pair<std::string, Manifest>> found;
    for (const auto& r : refs) found.emplace_back(r, load_one(r, std::nullopt));
    if (b.any()) {
      const TaskBundle t = load_bundle(b);
      found.emplace_back(std::string(kind_name(Kind::hardware)), t.hardware);
      found.emplace_back(std::string(kind_name(Kind::software)), t.software);
      found.emplace_back(std::string(kind_name(Kind::dataset)), t.dataset);
      found.emplace_back(std::string(kind_name(Kind::model)), t.model);
    }
    json arr = json::array();
    for (const auto& [ref, m] : found) {
      if (g_.as_json()) {
        arr.push_back({{"ref", ref}, {"id", canonical_id(m)}});
      } else {
        out_ << ref << " -> " << canonical_id(m) << "\n";
      }
    }
    if (g_.as_json()) out_ << arr.dump(2) << "\n";
    return exit_code::ok;
  }

  int cmd_publish(const std::vector<std::string>& inputs) {
    Registry reg(registry_root_);
    json arr = json::array();
    for (const auto& path : expand(inputs)) {
      const Manifest m = load_manifest_file(path);
      const ManifestId id = reg.put(m);
      if (g_.as_json()) {
        arr.push_back({{"id", id.to_string()}, {"path", reg.path_for(id).string()}});
      } else {
        out_ << id.to_string() << " " << reg.path_for(id).string() << "\n";
      }
    }
    if (g_.as_json()) out_ << arr.dump(2) << "\n";
    return exit_code::ok;
  }

  int cmd_fetch(const std::vector<std::string>& refs, const BundleArgs& b) {
    if (refs.empty() && !b.any()) throw UsageError("fetch needs refs or a bundle");
    std::vector<Manifest> manifests;
    for (const auto& r : refs) manifests.push_back(load_one(r, std::nullopt));
    if (b.any()) {
      const TaskBundle t = load_bundle(b);
      manifests.emplace_back(t.dataset);
      manifests.emplace_back(t.model);
    }
    ResourceFetcher fetcher(cache_root_, counters_, hooks_.transport);
    json arr = json::array();
    for (const auto& m : manifests) {
      std::vector<ResourceRef> resources;
      if (const auto* d = std::get_if<DatasetManifest>(&m)) resources = d->resources;
      else if (const auto* mm = std::get_if<ModelManifest>(&m)) resources = mm->artifacts;
      else throw UsageError(canonical_id(m) + " has no resources; pass dataset or model refs");
      const auto paths = fetcher.fetch_all(resources);
      for (std::size_t i = 0; i < resources.size(); ++i) {
        if (g_.as_json()) {
          arr.push_back({{"manifest", canonical_id(m)},
                         {"url", resources[i].url},
                         {"checksum", resources[i].checksum.to_string()},
                         {"path", paths[i].string()}});
        } else {
          out_ << resources[i].checksum.to_string() << " " << paths[i].string() << "\n";
        }
      }
    }
    if (g_.as_json()) {
      out_ << json{{"resources", arr}, {"counters", counters_json(*counters_)}}.dump(2) << "\n";
    }
    return exit_code::ok;
  }

  ExecuteOptions execute_options(bool dry_run) {
    ExecuteOptions o;
    o.cache = cache_root_;
    o.backend = *parse_backend(g_.backend);
    o.backend_options.engine = g_.engine;
    o.backend_options.engine_args = g_.engine_args;
    o.backend_options.counters = counters_;
    if (!g_.worker_cmd.empty()) {
      o.worker_cmd = split_words(g_.worker_cmd);
      if (o.worker_cmd.empty()) throw UsageError("--worker-cmd is empty");
    }
    if (!g_.host_file.empty()) o.host = load_host(g_.host_file);
    o.allow_unknown = g_.allow_unknown;
    o.dry_run = dry_run;
    o.counters = counters_;
    o.runner = hooks_.runner;
    o.transport = hooks_.transport;
    return o;
  }

  HostDescription load_host(const std::string& path) {
    const std::string text = read_input(path);
    try {
      return parse_host_file(text);
    } catch (const ManifestError& e) {
      throw SourcedManifestError(path, e.violations());
    }
  }

  static json failure_json(const RunFailure& f) {
    return {{"step", std::string(step_action_name(f.step))},
            {"tags", f.tags},
            {"code", f.code},
            {"cause", f.cause},
            {"message", f.message}};
  }

  static std::string step_line(const StepRecord& s) {
    std::string tags;
    for (int t : s.tags) tags += circled(t);
    std::ostringstream line;
    line << std::left << std::setw(8) << std::string(step_status_name(s.status)) << " "
         << std::setw(14) << std::string(step_action_name(s.action)) << " " << std::setw(6) << tags;
    if (!s.detail.empty()) line << " " << s.detail;
    return line.str();
  }

  int cmd_run(const BundleArgs& b, bool dry_run, bool emit, const std::vector<std::string>& authors,
              const fs::path& run_dir) {
    std::map<std::string, Scalar> author_info;
    for (const auto& a : authors) {
      auto [k, v] = split_pair(a, "--author");
      author_info[k] = scalar_from_text(v);
    }
    if (emit && dry_run) throw UsageError("--emit-reference-log cannot be combined with --dry-run");
    const TaskBundle bundle = load_bundle(b);
    const ExecutionPlan p = plan(bundle);
    const ExecuteOptions opts = execute_options(dry_run);
    const RunRecord record = execute(p, opts);
    const int rc = record.failure ? exit_code_for(failure_errc(record).value_or(Errc::stage_failed)) : exit_code::ok;

    json j = {{"bundle",
               {{"hardware", record.bundle.hardware.to_string()},
                {"software", record.bundle.software.to_string()},
                {"dataset", record.bundle.dataset.to_string()},
                {"model", record.bundle.model.to_string()}}},
              {"dry_run", dry_run},
              {"exit_code", rc}};
    if (dry_run) {
      j["plan"] = p.to_json()["steps"];
      j["gate"] = record.step(StepAction::gate)->status == StepStatus::ok ? "satisfied" : "failed";
      if (!g_.as_json()) {
        out_ << p.to_text();
        out_ << "gate: " << j["gate"].get<std::string>();
        if (!record.step(StepAction::gate)->detail.empty()) {
          out_ << " (" << record.step(StepAction::gate)->detail << ")";
        }
        out_ << "\n";
      }
    } else {
      const fs::path record_path = persist_record(record, run_dir);
      j["record"] = record_path.string();
      j["status"] = record.succeeded() ? "succeeded" : "failed";
      json steps = json::array();
      for (const auto& s : record.steps) {
        steps.push_back({{"action", std::string(step_action_name(s.action))},
                         {"tags", s.tags},
                         {"status", std::string(step_status_name(s.status))},
                         {"duration_ms", s.duration_ms}});
      }
      j["steps"] = steps;
      j["final_output_digest"] =
          record.final_output_digest ? json(record.final_output_digest->to_string()) : json(nullptr);
      j["metrics"] = record.metrics;
      if (emit && record.succeeded()) {
        const ReferenceLog log = emit_reference_log(record, author_info);
        const fs::path log_path = record_path.parent_path() / std::string(kReferenceLogFileName);
        std::ofstream f(log_path, std::ios::binary | std::ios::trunc);
        f << serialize(log);
        f.close();
        if (!f) throw Error(Errc::io, "cannot write " + log_path.string());
        j["reference_log"] = log_path.string();
      }
      if (!g_.as_json()) {
        for (const auto& s : record.steps) out_ << step_line(s) << "\n";
        if (record.final_output_digest) {
          out_ << "final_output_digest: " << record.final_output_digest->to_string() << "\n";
        }
        out_ << "record: " << record_path.string() << "\n";
        if (j.contains("reference_log")) {
          out_ << "reference_log: " << j["reference_log"].get<std::string>() << "\n";
        }
      }
    }
    j["counters"] = counters_json(*counters_);
    if (record.failure) {
      j["failure"] = failure_json(*record.failure);
      err_ << "dlspec: " << record.failure->code << " at "
           << step_action_name(record.failure->step) << ": " << record.failure->message << "\n";
    }
    if (g_.as_json()) out_ << j.dump(2) << "\n";
    return rc;
  }

  static fs::path record_file(const std::string& p) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) return fs::path(p) / std::string(kRecordFileName);
    return p;
  }

  int cmd_compare(const std::string& record_arg, const std::string& ref_arg,
                  const std::vector<std::string>& tols) {
    std::map<std::string, double> tolerances;
    for (const auto& t : tols) {
      auto [k, v] = split_pair(t, "--tol");
      tolerances[k] = number_from_text(v, "--tol");
    }
    const fs::path rp = record_file(record_arg);
    const fs::path lp = ref_arg;
    RunRecord record;
    ReferenceLog log;
    try {
      record = parse_run_record(read_input(rp));
    } catch (const ManifestError& e) {
      throw SourcedManifestError(rp.string(), e.violations());
    }
    try {
      log = parse_reference_log(read_input(lp));
    } catch (const ManifestError& e) {
      throw SourcedManifestError(lp.string(), e.violations());
    }
    auto vs = validate(log);
    if (has_errors(vs)) throw SourcedManifestError(lp.string(), std::move(vs));
    const ComparisonReport report = compare_logs(record, log, tolerances);
    const int rc = report.passed() ? exit_code::ok : exit_code::compare;
    if (g_.as_json()) {
      json j = report.to_json();
      j["exit_code"] = rc;
      out_ << j.dump(2) << "\n";
    } else {
      out_ << report.to_text();
    }
    return rc;
  }

  int cmd_probe(const std::string& hardware) {
    const HostDescription host = g_.host_file.empty() ? probe_host() : load_host(g_.host_file);
    std::optional<GateReport> gate;
    if (!hardware.empty()) {
      const auto hw = std::get<HardwareManifest>(load_one(hardware, Kind::hardware));
      gate = evaluate(hw.constraints, host, g_.allow_unknown);
    }
    const int rc = gate && !gate->passed() ? exit_code::gate : exit_code::ok;
    if (g_.as_json()) {
      json values = json::object();
      for (const auto& [k, v] : host.values) {
        std::visit([&](const auto& x) { values[k] = x; }, v);
      }
      json j = {{"source", host.source == HostDescription::Source::probed ? "probed" : "declared"},
                {"values", values},
                {"fingerprint", "sha256:" + host_fingerprint(host)},
                {"exit_code", rc}};
      if (gate) {
        json results = json::array();
        for (const auto& r : gate->results) {
          results.push_back({{"key", r.constraint.key},
                             {"op", std::string(constraint_op_name(r.constraint.op))},
                             {"verdict", std::string(verdict_name(r.verdict))},
                             {"actual", r.actual ? json(scalar_text(*r.actual)) : json(nullptr)},
                             {"detail", r.detail}});
        }
        j["gate"] = {{"passed", gate->passed()}, {"results", results}};
      }
      out_ << j.dump(2) << "\n";
    } else {
      out_ << serialize(host);
      if (gate) {
        out_ << "gate: " << (gate->passed() ? "satisfied" : "failed") << "\n";
        if (!gate->passed()) out_ << gate->summary();
      }
    }
    return rc;
  }

  std::ostream& out_;
  std::ostream& err_;
  const CliHooks& hooks_;
  Counters own_counters_;
  Counters* counters_;
  Global g_;
  fs::path registry_root_;
  fs::path cache_root_;
};

}  // namespace

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::malformed:
    case Errc::not_found:
    case Errc::conflict:
    case Errc::bundle_kinds:
    case Errc::invalid_manifest:
      return exit_code::validation;
    case Errc::gate_failed:
      return exit_code::gate;
    case Errc::checksum_mismatch:
    case Errc::unreachable:
    case Errc::unsupported_scheme:
    case Errc::unpack_failed:
    case Errc::fetch_failed:
      return exit_code::fetch;
    default:
      return exit_code::execution;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliHooks& hooks) {
  try {
    Cli cli(out, err, hooks);
    return cli.main(args);
  } catch (const std::exception& e) {
    err << "dlspec: internal: " << e.what() << "\n";
    return exit_code::execution;
  }
}

}  // namespace dlspec
