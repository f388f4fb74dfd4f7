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

#include "dlspec/gate.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "dlspec/digest.hpp"
#include "document.hpp"

namespace dlspec {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kHostKind = "host";

std::optional<std::string> read_first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  if (in && std::getline(in, line)) return line;
  return std::nullopt;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool scalars_equal(const Scalar& a, const Scalar& b) {
  if (scalar_is_numeric(a) && scalar_is_numeric(b)) {
    return scalar_number(a) == scalar_number(b);
  }
  return scalar_text(a) == scalar_text(b);
}

std::string value_text(const ConstraintValue& v) {
  if (const auto* s = std::get_if<Scalar>(&v)) return scalar_text(*s);
  std::string out = "[";
  const auto& list = std::get<std::vector<Scalar>>(v);
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i) out += ", ";
    out += scalar_text(list[i]);
  }
  return out + "]";
}

ConstraintResult check_one(const Constraint& c, const HostDescription& host) {
  ConstraintResult r{c, Verdict::unsatisfied, std::nullopt, {}};
  const Scalar* actual = host.find(c.key);
  if (!actual) {
    r.verdict = Verdict::unknown_key;
    r.detail = "host does not describe '" + c.key + "'";
    return r;
  }
  r.actual = *actual;
  const std::string want = value_text(c.value);
  const Scalar* expected = std::get_if<Scalar>(&c.value);
  bool ok = false;
  switch (c.op) {
    case ConstraintOp::eq:
      ok = expected && scalars_equal(*actual, *expected);
      break;
    case ConstraintOp::ne:
      ok = expected && !scalars_equal(*actual, *expected);
      break;
    case ConstraintOp::ge:
    case ConstraintOp::le:
      if (!expected || !scalar_is_numeric(*expected) || !scalar_is_numeric(*actual)) {
        r.detail = "'" + c.key + "' = " + scalar_text(*actual) + " is not comparable with " + want;
        return r;
      }
      ok = c.op == ConstraintOp::ge ? scalar_number(*actual) >= scalar_number(*expected)
                                    : scalar_number(*actual) <= scalar_number(*expected);
      break;
    case ConstraintOp::in:
      if (const auto* list = std::get_if<std::vector<Scalar>>(&c.value)) {
        for (const auto& item : *list) ok = ok || scalars_equal(*actual, item);
      }
      break;
    case ConstraintOp::matches:
      if (expected && std::holds_alternative<std::string>(*expected)) {
        try {
          ok = std::regex_match(scalar_text(*actual), std::regex(std::get<std::string>(*expected)));
        } catch (const std::regex_error&) {
          r.detail = "invalid pattern " + want;
          return r;
        }
      }
      break;
  }
  r.verdict = ok ? Verdict::satisfied : Verdict::unsatisfied;
  r.detail = "'" + c.key + "' = " + scalar_text(*actual) + ", required " +
             std::string(constraint_op_name(c.op)) + " " + want;
  return r;
}

CommandOutcome run_one(std::size_t index, const SetupCommand& cmd, SetupMode mode,
                       CommandRunner& runner) {
  CommandOutcome out{index, cmd, false, {}, {}};
  if (mode == SetupMode::dry_run) return out;
  out.executed = true;
  try {
    ProcessResult r = runner.run(cmd);
    out.status = r.status;
    out.output = std::move(r.output);
    if (r.timed_out) out.output += "\n[timed out]";
  } catch (const Error& e) {
    out.status = ExitStatus{127, 0};
    out.output = e.what();
  }
  return out;
}

std::string join_argv(const std::vector<std::string>& argv) {
  std::string s;
  for (const auto& a : argv) s += (s.empty() ? "" : " ") + a;
  return s;
}

}  // namespace

const Scalar* HostDescription::find(const std::string& key) const {
  const auto it = values.find(key);
  return it == values.end() ? nullptr : &it->second;
}

HostDescription probe_host() {
  HostDescription h;
  h.source = HostDescription::Source::probed;
  utsname u{};
  if (::uname(&u) == 0) {
    h.values["architecture"] = std::string(u.machine);
    std::string os = u.sysname;
    for (char& c : os) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    h.values["os"] = os;
    h.values["kernel"] = std::string(u.release);
  }
  const long cpus = ::sysconf(_SC_NPROCESSORS_ONLN);
  if (cpus > 0) h.values["num_cpus"] = static_cast<std::int64_t>(cpus);
  const long pages = ::sysconf(_SC_PHYS_PAGES);
  const long page_size = ::sysconf(_SC_PAGE_SIZE);
  if (pages > 0 && page_size > 0) {
    const double gib = static_cast<double>(pages) * static_cast<double>(page_size) /
                       (1024.0 * 1024.0 * 1024.0);
    h.values["memory_gb"] = std::round(gib * 100.0) / 100.0;
  }
  {
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
      if (line.rfind("model name", 0) == 0) {
        const auto colon = line.find(':');
        if (colon != std::string::npos) h.values["cpu.model"] = trim(line.substr(colon + 1));
        break;
      }
    }
  }
  if (auto v = read_first_line("/sys/devices/system/cpu/intel_pstate/no_turbo")) {
    h.values["cpu.turbo_boost"] = std::string(trim(*v) == "1" ? "off" : "on");
  } else if (auto b = read_first_line("/sys/devices/system/cpu/cpufreq/boost")) {
    h.values["cpu.turbo_boost"] = std::string(trim(*b) == "1" ? "on" : "off");
  }
  std::error_code ec;
  if (fs::is_directory("/proc/driver/nvidia/gpus", ec)) {
    std::int64_t n = 0;
    for (auto it = fs::directory_iterator("/proc/driver/nvidia/gpus", ec);
         !ec && it != fs::directory_iterator(); it.increment(ec)) {
      ++n;
    }
    h.values["gpu.count"] = n;
  }
  return h;
}

HostDescription parse_host_file(std::string_view text) {
  detail::Diagnostics diag;
  HostDescription host;
  host.source = HostDescription::Source::declared;
  if (auto tree = detail::parse_tree(text, diag)) {
    detail::MapReader root = detail::open_document(*tree, kHostKind, diag);
    host.values = detail::read_scalar_map(root.required("host"), "host", diag);
    root.finish();
  }
  detail::throw_if_errors(diag);
  return host;
}

std::string serialize(const HostDescription& host) {
  yaml::Node root = yaml::Node::mapping();
  root.set("kind", yaml::Node::scalar(std::string(kHostKind)));
  root.set("host", detail::scalar_map_node(host.values));
  return yaml::emit(root);
}

std::string host_fingerprint(const HostDescription& host) {
  return sha256_hex(serialize(host));
}

std::string_view verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::unsatisfied: return "unsatisfied";
    case Verdict::unknown_key: return "unknown-key";
  }
  return "?";
}

bool GateReport::passed() const noexcept {
  for (const auto& r : results) {
    if (r.verdict == Verdict::unsatisfied) return false;
    if (r.verdict == Verdict::unknown_key && !allow_unknown) return false;
  }
  return true;
}

std::string GateReport::summary() const {
  std::ostringstream out;
  for (const auto& r : results) {
    if (r.verdict == Verdict::satisfied) continue;
    if (r.verdict == Verdict::unknown_key && allow_unknown) continue;
    out << r.constraint.key << ": " << verdict_name(r.verdict) << " (" << r.detail << ")\n";
  }
  return out.str();
}

GateReport evaluate(std::span<const Constraint> constraints, const HostDescription& host,
                    bool allow_unknown) {
  GateReport report;
  report.allow_unknown = allow_unknown;
  for (const auto& c : constraints) report.results.push_back(check_one(c, host));
  return report;
}

ProcessResult HostCommandRunner::run(const SetupCommand& cmd) {
  if (counters_) counters_->setup_commands++;
  SpawnOptions o;
  o.argv = cmd.argv;
  return run_process(o, timeout_);
}

SetupReport run_setup(std::span<const SetupCommand> cmds, SetupMode mode, CommandRunner& runner) {
  SetupReport report;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    report.entries.push_back(run_one(i, cmds[i], mode, runner));
    const CommandOutcome& last = report.entries.back();
    if (!last.ok() && cmds[i].must_succeed) {
      const std::string msg = "setup command " + std::to_string(i) + " (" +
                              join_argv(cmds[i].argv) + ") failed with " +
                              last.status.to_string() + ": " + last.output;
      throw SetupError(msg, std::move(report));
    }
  }
  return report;
}

SetupReport run_teardown(std::span<const SetupCommand> teardown, std::size_t setup_count,
                         std::span<const CommandOutcome> setup_done, SetupMode mode,
                         CommandRunner& runner) {
  SetupReport report;
  for (std::size_t i = teardown.size(); i-- > 0;) {
    if (mode == SetupMode::execute && i < setup_count) {
      const bool succeeded = i < setup_done.size() && setup_done[i].executed &&
                             setup_done[i].status.success();
      if (!succeeded) continue;
    }
    report.entries.push_back(run_one(i, teardown[i], mode, runner));
  }
  return report;
}

}  // namespace dlspec
