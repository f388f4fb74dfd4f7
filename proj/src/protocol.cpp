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

#include "dlspec/protocol.hpp"

#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>

#include "dlspec/digest.hpp"

namespace dlspec::protocol {

namespace {

constexpr std::array<std::string_view, 9> kContextKeys = {
    "protocol_version", "manifests", "task_kind", "inputs", "outputs",
    "hyperparameters", "artifacts", "scratch_dir", "element_count"};

[[noreturn]] void violation(const std::string& message) {
  throw Error(Errc::protocol_violation, message);
}

bool read_full(int fd, char* buf, std::size_t n, std::size_t& got) {
  got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, buf + got, n - got);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

const json& member(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) violation(type_of(j) + " frame lacks '" + key + "'");
  return *it;
}

Stage stage_member(const json& j) {
  const json& s = member(j, "stage");
  if (!s.is_string()) violation("'stage' must be a string");
  auto st = parse_stage(s.get<std::string>());
  if (!st) violation("unknown stage '" + s.get<std::string>() + "'");
  return *st;
}

std::vector<StageResult> stage_list(const json& j) {
  std::vector<StageResult> out;
  auto it = j.find("stages");
  if (it == j.end()) return out;
  if (!it->is_array()) violation("'stages' must be an array");
  for (const auto& s : *it) out.push_back(stage_result_from_json(s));
  return out;
}

}  // namespace

std::span<const std::string_view> context_keys() noexcept { return kContextKeys; }

std::string encode_frame(const json& message) {
  const std::string body = message.dump(-1, ' ', false, json::error_handler_t::replace);
  if (body.size() > kMaxFrameBytes) {
    throw Error(Errc::protocol_violation, "frame of " + std::to_string(body.size()) +
                                              " bytes exceeds the limit");
  }
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += body;
  return out;
}

std::uint32_t decode_length(const char header[4]) noexcept {
  const auto* u = reinterpret_cast<const unsigned char*>(header);
  return (std::uint32_t{u[0]} << 24) | (std::uint32_t{u[1]} << 16) |
         (std::uint32_t{u[2]} << 8) | std::uint32_t{u[3]};
}

json parse_frame_body(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) violation("frame is not valid JSON");
  if (!j.is_object()) violation("frame is not a JSON object");
  auto t = j.find("type");
  if (t == j.end() || !t->is_string()) violation("frame has no string 'type'");
  return j;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<json> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const std::uint32_t n = decode_length(buffer_.data());
  if (n > kMaxFrameBytes) violation("frame length " + std::to_string(n) + " exceeds the limit");
  if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
  json j = parse_frame_body(std::string_view(buffer_).substr(4, n));
  buffer_.erase(0, 4 + std::size_t{n});
  return j;
}

bool write_frame(int fd, const json& message) {
  const std::string bytes = encode_frame(message);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + off, bytes.size() - off);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    off += static_cast<std::size_t>(w);
  }
  return true;
}

std::optional<json> read_frame(int fd) {
  char header[4];
  std::size_t got = 0;
  if (!read_full(fd, header, 4, got)) {
    if (got == 0) return std::nullopt;
    violation("truncated frame header");
  }
  const std::uint32_t n = decode_length(header);
  if (n > kMaxFrameBytes) violation("frame length " + std::to_string(n) + " exceeds the limit");
  std::string body(n, '\0');
  if (!read_full(fd, body.data(), n, got)) violation("truncated frame body");
  return parse_frame_body(body);
}

std::string type_of(const json& message) {
  auto t = message.find("type");
  return t != message.end() && t->is_string() ? t->get<std::string>() : std::string();
}

std::string canonical_json(const json& value) {
  return value.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string output_digest(const json& value) {
  const std::string bytes =
      value.is_string() ? value.get<std::string>() : canonical_json(value);
  return "sha256:" + sha256_hex(bytes);
}

std::string preview(const json& value, std::size_t limit) {
  std::string text = value.is_string() ? value.get<std::string>() : canonical_json(value);
  if (text.size() <= limit) return text;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xc0) == 0x80) --cut;
  text.resize(cut);
  return text;
}

json to_json(const StageResult& r) {
  json j = {{"stage", std::string(stage_name(r.stage))}, {"wall_time_ms", r.wall_time_ms}};
  if (r.output_digest) j["output_digest"] = *r.output_digest;
  j["preview"] = r.preview;
  if (r.error) j["error"] = *r.error;
  return j;
}

StageResult stage_result_from_json(const json& j) {
  if (!j.is_object()) violation("stage result is not an object");
  StageResult r;
  r.stage = stage_member(j);
  const json& t = member(j, "wall_time_ms");
  if (!t.is_number() || !std::isfinite(t.get<double>()) || t.get<double>() < 0) {
    violation("'wall_time_ms' must be a non-negative number");
  }
  r.wall_time_ms = t.get<double>();
  if (auto it = j.find("output_digest"); it != j.end() && it->is_string()) {
    r.output_digest = it->get<std::string>();
  }
  if (auto it = j.find("preview"); it != j.end() && it->is_string()) {
    r.preview = it->get<std::string>();
  }
  if (auto it = j.find("error"); it != j.end() && it->is_string()) {
    r.error = it->get<std::string>();
  }
  if (r.output_digest.has_value() == r.error.has_value()) {
    violation("stage result needs exactly one of 'output_digest' and 'error'");
  }
  return r;
}

StageError::StageError(Errc code, Stage stage, std::string detail,
                       std::vector<StageResult> completed)
    : Error(code, std::string(stage_name(stage)) + ": " + detail),
      stage_(stage),
      detail_(std::move(detail)),
      completed_(std::move(completed)) {}

json make_hello(int version) {
  return {{"type", std::string(msg::hello)}, {"protocol_version", version}};
}

json make_load(const ModelManifest& model, const json& ctx) {
  json stages = json::object();
  for (Stage s : kAllStages) {
    const StageCode& code = model.stage(s);
    stages[std::string(stage_name(s))] = {{"language", code.language}, {"source", code.source}};
  }
  return {{"type", std::string(msg::load)}, {"stages", stages}, {"ctx", ctx}};
}

json make_run(const std::vector<std::string>& initial_data, std::size_t output_cap) {
  return {{"type", std::string(msg::run)},
          {"initial_data", initial_data},
          {"output_cap_bytes", output_cap}};
}

json make_terminate() { return {{"type", std::string(msg::terminate)}}; }

json make_violation(const std::string& message) {
  return {{"type", std::string(msg::protocol_violation)}, {"message", message}};
}

RunResult parse_run_reply(const json& reply) {
  const std::string type = type_of(reply);
  if (type == msg::stage_error) {
    const json& kind = member(reply, "kind");
    const Stage stage = stage_member(reply);
    std::string detail;
    for (const char* key : {"traceback", "message"}) {
      if (auto it = reply.find(key); it != reply.end() && it->is_string()) {
        detail = it->get<std::string>();
        break;
      }
    }
    const Errc code = kind == "compile" ? Errc::compile_error : Errc::stage_failed;
    throw StageError(code, stage, detail, stage_list(reply));
  }
  if (type == msg::protocol_violation) {
    const auto it = reply.find("message");
    violation("worker reported a protocol violation: " +
              (it != reply.end() && it->is_string() ? it->get<std::string>() : std::string()));
  }
  if (type != msg::result) violation("expected RESULT, got '" + type + "'");
  RunResult r;
  const json& digest = member(reply, "final_output_digest");
  if (!digest.is_string()) violation("'final_output_digest' must be a string");
  r.final_output_digest = digest.get<std::string>();
  if (auto it = reply.find("truncated"); it != reply.end()) {
    if (!it->is_boolean()) violation("'truncated' must be a boolean");
    r.truncated = it->get<bool>();
  }
  if (!r.truncated) {
    r.final_output = member(reply, "final_output");
    if (output_digest(r.final_output) != r.final_output_digest) {
      violation("final_output does not match final_output_digest");
    }
  }
  r.stages = stage_list(reply);
  if (auto it = reply.find("metrics"); it != reply.end()) {
    if (!it->is_object()) violation("'metrics' must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_number()) violation("metric '" + k + "' is not a number");
      r.metrics[k] = v.get<double>();
    }
  }
  return r;
}

}  // namespace dlspec::protocol
