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

#include <stdexcept>
#include <string>
#include <string_view>

namespace dlspec {

// Stable machine codes for every failure the runtime can raise. The string
// form (errc_name) is part of the CLI/JSON contract.
enum class Errc {
  malformed,
  io,
  not_found,
  conflict,
  bundle_kinds,
  invalid_manifest,
  checksum_mismatch,
  unreachable,
  unsupported_scheme,
  unpack_failed,
  gate_failed,
  command_failed,
  engine_missing,
  image_not_found,
  mount_source_missing,
  launch_failed,
  spawn_failure,
  handshake_timeout,
  protocol_mismatch,
  protocol_violation,
  terminated_handle,
  stage_failed,
  compile_error,
  record_failed,
  fetch_failed,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dlspec
