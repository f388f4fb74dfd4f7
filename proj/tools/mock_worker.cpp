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

// Stand-in stage host for tests. Speaks the framed protocol on stdin/stdout
// but never executes stage code: outputs are canned or echoed.

#include <signal.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dlspec/manifest.hpp"
#include "dlspec/protocol.hpp"

namespace proto = dlspec::protocol;
using proto::json;

namespace {

constexpr std::string_view kSignature = "def fun(ctx, data):";

struct Options {
  std::optional<std::string> output;
  std::string fail_stage;
  std::optional<int> protocol_version;
  bool exit_immediately = false;
  bool silent = false;
  std::string record;
  std::string echo_env;
  std::vector<std::string> metrics;
  int delay_ms = 0;
  bool ignore_terminate = false;
};

class Worker {
 public:
  explicit Worker(Options o) : o_(std::move(o)) {}

  int serve() {
    for (;;) {
      std::optional<json> frame;
      try {
        frame = proto::read_frame(STDIN_FILENO);
      } catch (const dlspec::Error& e) {
        return violate(e.what());
      }
      if (!frame) return 0;
      record(*frame);
      if (o_.silent) continue;
      const std::string type = proto::type_of(*frame);
      if (!greeted_ && type != proto::msg::hello) return violate(type + " before HELLO");
      if (type == proto::msg::hello) {
        if (!hello(*frame)) return 2;
      } else if (type == proto::msg::load) {
        if (!load(*frame)) return 2;
      } else if (type == proto::msg::run) {
        if (!loaded_) return violate("RUN before LOAD");
        if (!run(*frame)) return 2;
      } else if (type == proto::msg::terminate) {
        if (o_.ignore_terminate) hang();
        return 0;
      } else {
        return violate("unexpected frame type '" + type + "'");
      }
    }
  }

 private:
  int violate(const std::string& message) {
    proto::write_frame(STDOUT_FILENO, proto::make_violation(message));
    std::cerr << "mock worker: " << message << "\n";
    return 2;
  }

  void record(const json& frame) {
    if (o_.record.empty()) return;
    std::ofstream out(o_.record, std::ios::app);
    out << proto::canonical_json(frame) << "\n";
  }

  [[noreturn]] void hang() {
    ::signal(SIGTERM, SIG_IGN);
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
  }

  bool send(const json& j) { return proto::write_frame(STDOUT_FILENO, j); }

  bool hello(const json& f) {
    auto v = f.find("protocol_version");
    if (v == f.end() || !v->is_number_integer()) {
      violate("HELLO without integer protocol_version");
      return false;
    }
    greeted_ = true;
    const int version = o_.protocol_version.value_or(v->get<int>());
    return send({{"type", std::string(proto::msg::hello_ack)}, {"protocol_version", version}});
  }

  bool load(const json& f) {
    auto stages = f.find("stages");
    auto ctx = f.find("ctx");
    if (stages == f.end() || !stages->is_object() || ctx == f.end() || !ctx->is_object()) {
      violate("LOAD needs 'stages' and 'ctx' objects");
      return false;
    }
    for (dlspec::Stage s : dlspec::kAllStages) {
      const std::string name(dlspec::stage_name(s));
      auto code = stages->find(name);
      if (code == stages->end() || !code->is_object() || !code->contains("source") ||
          !(*code)["source"].is_string()) {
        violate("LOAD lacks stage '" + name + "'");
        return false;
      }
      if ((*code)["source"].get<std::string>().find(kSignature) == std::string::npos) {
        loaded_ = false;
        return send({{"type", std::string(proto::msg::stage_error)},
                     {"kind", "compile"},
                     {"stage", name},
                     {"message", "SyntaxError: no 'def fun(ctx, data):' in stage source"}});
      }
    }
    loaded_ = true;
    return send({{"type", std::string(proto::msg::load_ack)}});
  }

  bool run(const json& f) {
    auto data = f.find("initial_data");
    if (data == f.end() || !data->is_array()) {
      violate("RUN needs an 'initial_data' array");
      return false;
    }
    std::size_t cap = proto::kDefaultOutputCap;
    if (auto c = f.find("output_cap_bytes"); c != f.end() && c->is_number_unsigned()) {
      cap = c->get<std::size_t>();
    }
    if (o_.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(o_.delay_ms));

    json output = *data;
    if (o_.output) {
      output = *o_.output;
    } else if (!o_.echo_env.empty()) {
      const char* v = std::getenv(o_.echo_env.c_str());
      output = v ? json(v) : json(nullptr);
    }

    json stages = json::array();
    for (dlspec::Stage s : dlspec::kAllStages) {
      const std::string name(dlspec::stage_name(s));
      if (name == o_.fail_stage) {
        return send({{"type", std::string(proto::msg::stage_error)},
                     {"kind", "runtime"},
                     {"stage", name},
                     {"traceback", "Traceback (most recent call last):\n"
                                   "RuntimeError: injected failure in " + name},
                     {"stages", stages}});
      }
      proto::StageResult r;
      r.stage = s;
      r.wall_time_ms = 0.25;
      const json& value = s == dlspec::Stage::post_processing ? output : *data;
      r.output_digest = proto::output_digest(value);
      r.preview = proto::preview(value);
      stages.push_back(proto::to_json(r));
    }

    json metrics = json::object();
    for (const auto& kv : o_.metrics) {
      const auto eq = kv.find('=');
      metrics[kv.substr(0, eq)] = eq == std::string::npos ? 0.0 : std::stod(kv.substr(eq + 1));
    }
    const std::string digest = proto::output_digest(output);
    const bool truncated = proto::canonical_json(output).size() > cap;
    return send({{"type", std::string(proto::msg::result)},
                 {"final_output", truncated ? json(nullptr) : output},
                 {"final_output_digest", digest},
                 {"truncated", truncated},
                 {"stages", stages},
                 {"metrics", metrics}});
  }

  Options o_;
  bool greeted_ = false;
  bool loaded_ = false;
};

}  // namespace

int main(int argc, char** argv) {
  ::signal(SIGPIPE, SIG_IGN);
  Options o;
  CLI::App app{"dlspec mock stage host"};
  app.add_option("--output", o.output, "Canned final output (a string)");
  app.add_option("--fail-stage", o.fail_stage, "Stage that raises at RUN time");
  app.add_option("--protocol-version", o.protocol_version, "Version sent in HELLO_ACK");
  app.add_flag("--exit-immediately", o.exit_immediately, "Exit 3 before the handshake");
  app.add_flag("--silent", o.silent, "Read frames but never reply");
  app.add_option("--record", o.record, "Append every received frame to this file");
  app.add_option("--echo-env", o.echo_env, "Reply with this environment variable");
  app.add_option("--metric", o.metrics, "Report metric k=v (repeatable)");
  app.add_option("--delay-ms", o.delay_ms, "Sleep before each RESULT");
  app.add_flag("--ignore-terminate", o.ignore_terminate, "Ignore TERMINATE and SIGTERM");
  CLI11_PARSE(app, argc, argv);

  if (o.exit_immediately) {
    std::cerr << "mock worker: exiting before handshake as requested\n";
    return 3;
  }
  return Worker(std::move(o)).serve();
}
