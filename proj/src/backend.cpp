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

#include "dlspec/backend.hpp"

#include <unistd.h>

#include "file_lock.hpp"

namespace dlspec {

namespace fs = std::filesystem;
using protocol::json;

namespace {

using Clock = std::chrono::steady_clock;

Clock::time_point deadline_after(Millis timeout) {
  if (timeout.count() <= 0) return Clock::now() + std::chrono::hours(24 * 365);
  return Clock::now() + timeout;
}

// nullopt on EOF before a complete frame.
std::optional<json> read_message(ChildProcess& child, Clock::time_point deadline) {
  char header[4];
  if (!child.read_exact(header, 4, deadline)) return std::nullopt;
  const std::uint32_t n = protocol::decode_length(header);
  if (n > protocol::kMaxFrameBytes) {
    throw Error(Errc::protocol_violation, "frame length " + std::to_string(n) + " exceeds the limit");
  }
  std::string body(n, '\0');
  if (n > 0 && !child.read_exact(body.data(), n, deadline)) {
    throw Error(Errc::protocol_violation, "worker closed the channel mid-frame");
  }
  return protocol::parse_frame_body(body);
}

std::string tail(const std::string& text) {
  return text.empty() ? std::string("(no output)") : text;
}

}  // namespace

std::string_view backend_name(BackendKind k) noexcept {
  return k == BackendKind::container ? "container" : "process";
}

std::optional<BackendKind> parse_backend(std::string_view text) noexcept {
  if (text == "container") return BackendKind::container;
  if (text == "process") return BackendKind::process;
  return std::nullopt;
}

// WorkerChannel ------------------------------------------------------------

WorkerChannel::WorkerChannel(std::unique_ptr<ChildProcess> child, Counters* counters)
    : child_(std::move(child)), counters_(counters) {}

WorkerChannel::~WorkerChannel() {
  if (!closed_) close(Millis{0});
}

void WorkerChannel::handshake(Millis timeout) {
  const auto deadline = deadline_after(timeout);
  auto exited = [&](const std::string& what) -> Error {
    const ExitStatus s = child_->wait_for(Millis{1000}).value_or(ExitStatus{});
    return Error(Errc::spawn_failure, "worker " + what + " (" + s.to_string() +
                                          "): " + tail(child_->collect_stderr(Millis{500})));
  };
  if (!child_->write_all(protocol::encode_frame(protocol::make_hello()))) {
    throw exited("exited before the handshake");
  }
  std::optional<json> reply;
  try {
    reply = read_message(*child_, deadline);
  } catch (const Error& e) {
    if (e.code() == Errc::handshake_timeout) {
      throw Error(Errc::handshake_timeout,
                  "no HELLO_ACK within " + std::to_string(timeout.count()) + " ms");
    }
    throw Error(Errc::protocol_mismatch, std::string("bad handshake reply: ") + e.what());
  }
  if (!reply) throw exited("exited before the handshake");
  const std::string type = protocol::type_of(*reply);
  if (type != protocol::msg::hello_ack) {
    throw Error(Errc::protocol_mismatch, "expected HELLO_ACK, got '" + type + "'");
  }
  auto v = reply->find("protocol_version");
  if (v == reply->end() || !v->is_number_integer() || v->get<int>() != protocol::kVersion) {
    throw Error(Errc::protocol_mismatch,
                "worker speaks protocol version " +
                    (v == reply->end() ? std::string("(none)") : v->dump()) + ", expected " +
                    std::to_string(protocol::kVersion));
  }
}

void WorkerChannel::send(const json& message) {
  if (closed_) throw Error(Errc::terminated_handle, "worker channel is closed");
  if (!child_->write_all(protocol::encode_frame(message))) {
    throw Error(Errc::protocol_violation,
                "worker stopped reading: " + tail(child_->collect_stderr(Millis{200})));
  }
}

json WorkerChannel::receive(Millis timeout) {
  if (closed_) throw Error(Errc::terminated_handle, "worker channel is closed");
  auto reply = read_message(*child_, deadline_after(timeout));
  if (!reply) {
    const auto s = child_->wait_for(Millis{1000});
    throw Error(Errc::protocol_violation,
                "worker closed the channel" + (s ? " (" + s->to_string() + ")" : std::string()) +
                    ": " + tail(child_->collect_stderr(Millis{200})));
  }
  return *reply;
}

void WorkerChannel::load(const ModelManifest& model, const json& ctx, Millis timeout) {
  send(protocol::make_load(model, ctx));
  const json reply = receive(timeout);
  const std::string type = protocol::type_of(reply);
  if (type == protocol::msg::load_ack) return;
  if (type == protocol::msg::stage_error) protocol::parse_run_reply(reply);  // throws
  if (type == protocol::msg::protocol_violation) protocol::parse_run_reply(reply);
  throw Error(Errc::protocol_violation, "expected LOAD_ACK, got '" + type + "'");
}

protocol::RunResult WorkerChannel::run(const std::vector<std::string>& initial_data,
                                       std::size_t output_cap, Millis timeout) {
  if (counters_) counters_->stage_runs++;
  send(protocol::make_run(initial_data, output_cap));
  return protocol::parse_run_reply(receive(timeout));
}

ExitStatus WorkerChannel::close(Millis grace) {
  if (closed_) return status_;
  closed_ = true;
  if (!child_->exit_status()) {
    child_->write_all(protocol::encode_frame(protocol::make_terminate()));
    child_->close_stdin();
  }
  if (auto s = child_->wait_for(grace)) {
    status_ = *s;
  } else {
    status_ = child_->terminate(Millis{0});
  }
  return status_;
}

std::string WorkerChannel::stderr_text() const { return child_->stderr_text(); }

// Environment --------------------------------------------------------------

Environment::Environment(std::string id, BackendKind kind, ExecutionSpec spec, BackendOptions opts)
    : spec_(std::move(spec)), opts_(std::move(opts)), id_(std::move(id)), kind_(kind) {}

void Environment::check_live() const {
  if (!live_) throw Error(Errc::terminated_handle, "environment " + id_ + " was shut down");
}

std::string Environment::map_path(const fs::path& host_path) const {
  check_live();
  if (kind_ == BackendKind::process) return host_path.string();
  const fs::path p = host_path.lexically_normal();
  const Mount* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& m : spec_.mounts) {
    const fs::path src = m.source.lexically_normal();
    auto [a, b] = std::mismatch(src.begin(), src.end(), p.begin(), p.end());
    if (a != src.end()) continue;
    const auto len = static_cast<std::size_t>(std::distance(src.begin(), src.end()));
    if (!best || len > best_len) {
      best = &m;
      best_len = len;
    }
  }
  if (!best) return host_path.string();
  return (best->target / p.lexically_relative(best->source.lexically_normal()))
      .lexically_normal()
      .string();
}

WorkerChannel& Environment::start_worker(const std::vector<std::string>& argv) {
  check_live();
  if (argv.empty()) throw Error(Errc::spawn_failure, "empty worker command");
  if (worker_ && !worker_->closed()) {
    throw Error(Errc::spawn_failure, "a worker is already running in " + id_);
  }
  auto channel = std::make_unique<WorkerChannel>(ChildProcess::spawn(worker_spawn(argv)),
                                                 opts_.counters);
  channel->handshake(opts_.handshake_timeout);
  worker_ = std::move(channel);
  return *worker_;
}

ExitReport Environment::shutdown() {
  if (!live_) return last_report_;
  ExitReport report;
  if (worker_) report.worker = worker_->close(opts_.grace);
  try {
    stop(report);
  } catch (const std::exception& e) {
    report.notes.push_back(e.what());
  }
  report.stopped = true;
  live_ = false;
  last_report_ = report;
  return report;
}

namespace {

class ProcessEnvironment : public Environment {
 public:
  ProcessEnvironment(ExecutionSpec spec, BackendOptions opts)
      : Environment("process-" + detail::random_suffix(), BackendKind::process,
                    std::move(spec), std::move(opts)) {}

 protected:
  SpawnOptions worker_spawn(const std::vector<std::string>& argv) const override {
    SpawnOptions o;
    o.argv = argv;
    o.env = spec_.env;
    if (!spec_.workdir.empty()) o.cwd = spec_.workdir;
    return o;
  }
  void stop(ExitReport&) override {}
};

class ContainerEnvironment : public Environment {
 public:
  ContainerEnvironment(std::string name, std::string engine, ExecutionSpec spec,
                       BackendOptions opts)
      : Environment(std::move(name), BackendKind::container, std::move(spec), std::move(opts)),
        engine_(std::move(engine)) {}

 protected:
  SpawnOptions worker_spawn(const std::vector<std::string>& argv) const override {
    if (opts_.counters) opts_.counters->engine_invocations++;
    SpawnOptions o;
    o.argv = {engine_, "exec", "-i"};
    if (!spec_.workdir.empty()) {
      o.argv.push_back("-w");
      o.argv.push_back(spec_.workdir.string());
    }
    o.argv.push_back(id());
    o.argv.insert(o.argv.end(), argv.begin(), argv.end());
    return o;
  }

  void stop(ExitReport& report) override {
    if (opts_.counters) opts_.counters->engine_invocations++;
    const auto r = run_process({{engine_, "rm", "-f", id()}, {}, {}, false}, Millis{60000});
    if (!r.status.success()) {
      report.notes.push_back("failed to remove container " + id() + ": " + r.output);
    }
  }

 private:
  std::string engine_;
};

ProcessResult engine_call(const std::string& engine, std::vector<std::string> args,
                          Counters* counters) {
  if (counters) counters->engine_invocations++;
  args.insert(args.begin(), engine);
  return run_process({std::move(args), {}, {}, false});
}

}  // namespace

std::string resolve_engine(const std::string& requested) {
  if (!requested.empty()) {
    if (requested.find('/') != std::string::npos) {
      return ::access(requested.c_str(), X_OK) == 0 ? requested : std::string();
    }
    return find_program(requested).string();
  }
  for (const char* name : {"docker", "podman"}) {
    const fs::path p = find_program(name);
    if (!p.empty()) return p.string();
  }
  return {};
}

std::unique_ptr<Environment> launch(const ExecutionSpec& spec, const BackendOptions& opts) {
  if (opts.counters) opts.counters->launches++;
  for (const auto& m : spec.mounts) {
    std::error_code ec;
    if (!fs::exists(m.source, ec)) {
      throw Error(Errc::mount_source_missing, "mount source " + m.source.string() + " does not exist");
    }
  }
  if (spec.backend == BackendKind::process) {
    if (!spec.workdir.empty() && !fs::is_directory(spec.workdir)) {
      throw Error(Errc::launch_failed, "workdir " + spec.workdir.string() + " is not a directory");
    }
    return std::unique_ptr<Environment>(new ProcessEnvironment(spec, opts));
  }

  if (spec.image.empty()) throw Error(Errc::malformed, "container backend needs an image");
  const std::string engine = resolve_engine(opts.engine);
  if (engine.empty()) {
    throw Error(Errc::engine_missing,
                opts.engine.empty() ? "no container engine (docker or podman) on PATH"
                                    : "container engine '" + opts.engine + "' not found");
  }
  if (!engine_call(engine, {"image", "inspect", spec.image}, opts.counters).status.success()) {
    const auto pull = engine_call(engine, {"pull", spec.image}, opts.counters);
    if (!pull.status.success()) {
      throw Error(Errc::image_not_found, "image " + spec.image + " not found: " + tail(pull.output));
    }
  }
  const std::string name = "dlspec-" + detail::random_suffix();
  std::vector<std::string> args = {"run", "-d", "--rm", "--name", name};
  for (const auto& [k, v] : spec.env) {
    args.push_back("-e");
    args.push_back(k + "=" + v);
  }
  for (const auto& m : spec.mounts) {
    args.push_back("-v");
    args.push_back(fs::absolute(m.source).string() + ":" + m.target.string() +
                   (m.read_only ? ":ro" : ""));
  }
  if (!spec.workdir.empty()) {
    args.push_back("-w");
    args.push_back(spec.workdir.string());
  }
  args.insert(args.end(), opts.engine_args.begin(), opts.engine_args.end());
  for (const char* a : {"--entrypoint", "sleep"}) args.push_back(a);
  args.push_back(spec.image);
  args.push_back("infinity");
  const auto run = engine_call(engine, args, opts.counters);
  if (!run.status.success()) {
    throw Error(Errc::launch_failed, "engine run failed (" + run.status.to_string() +
                                         "): " + tail(run.output));
  }
  return std::unique_ptr<Environment>(new ContainerEnvironment(name, engine, spec, opts));
}

}  // namespace dlspec
