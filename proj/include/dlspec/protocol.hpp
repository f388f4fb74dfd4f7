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

// Framed protocol between the orchestrator and a stage-host worker. Each
// frame is a 4-byte big-endian length followed by that many bytes of UTF-8
// JSON holding one object with a "type" member. See PROTOCOL.md.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlspec/error.hpp"
#include "dlspec/manifest.hpp"

namespace dlspec::protocol {

using json = nlohmann::json;

inline constexpr int kVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;
inline constexpr std::size_t kDefaultOutputCap = 16u << 20;

namespace msg {
inline constexpr std::string_view hello = "HELLO";
inline constexpr std::string_view hello_ack = "HELLO_ACK";
inline constexpr std::string_view load = "LOAD";
inline constexpr std::string_view load_ack = "LOAD_ACK";
inline constexpr std::string_view run = "RUN";
inline constexpr std::string_view result = "RESULT";
inline constexpr std::string_view stage_error = "STAGE_ERROR";
inline constexpr std::string_view terminate = "TERMINATE";
inline constexpr std::string_view protocol_violation = "PROTOCOL_VIOLATION";
}  // namespace msg

/// Keys of the ctx object passed to every stage, in documentation order.
std::span<const std::string_view> context_keys() noexcept;

std::string encode_frame(const json& message);

/// Incremental decoder. Throws Error(protocol_violation) for oversized
/// frames, invalid JSON, non-objects and objects without a string "type".
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  std::optional<json> next();
  std::size_t buffered() const noexcept { return buffer_.size(); }

 private:
  std::string buffer_;
};

/// Checks a decoded frame body. Throws Error(protocol_violation).
json parse_frame_body(std::string_view body);
std::uint32_t decode_length(const char header[4]) noexcept;

/// Blocking frame I/O on raw descriptors. read_frame returns nullopt on a
/// clean EOF before any header byte.
bool write_frame(int fd, const json& message);
std::optional<json> read_frame(int fd);

std::string type_of(const json& message);

/// `sha256:<hex>` of a final output. Strings hash as their UTF-8 bytes,
/// every other value as compact JSON with sorted keys.
std::string output_digest(const json& value);
std::string canonical_json(const json& value);

/// At most `limit` bytes of the canonical text, cut on a UTF-8 boundary.
std::string preview(const json& value, std::size_t limit = 256);

struct StageResult {
  Stage stage = Stage::run;
  double wall_time_ms = 0;
  std::optional<std::string> output_digest;
  std::string preview;
  std::optional<std::string> error;

  friend bool operator==(const StageResult&, const StageResult&) = default;
};

json to_json(const StageResult& r);
/// Throws Error(protocol_violation).
StageResult stage_result_from_json(const json& j);

struct RunResult {
  json final_output;  // null when truncated
  std::string final_output_digest;
  bool truncated = false;
  std::vector<StageResult> stages;
  std::map<std::string, double> metrics;
};

/// A STAGE_ERROR reply. `code()` is compile_error or stage_failed.
class StageError : public Error {
 public:
  StageError(Errc code, Stage stage, std::string detail,
             std::vector<StageResult> completed = {});

  Stage stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::vector<StageResult>& completed() const noexcept { return completed_; }

 private:
  Stage stage_;
  std::string detail_;
  std::vector<StageResult> completed_;
};

json make_hello(int version = kVersion);
json make_load(const ModelManifest& model, const json& ctx);
json make_run(const std::vector<std::string>& initial_data,
              std::size_t output_cap = kDefaultOutputCap);
json make_terminate();
json make_violation(const std::string& message);

/// Interprets a reply to RUN. Throws StageError or Error(protocol_violation).
RunResult parse_run_reply(const json& reply);

}  // namespace dlspec::protocol
