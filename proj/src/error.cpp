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

#include "dlspec/error.hpp"

namespace dlspec {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::malformed: return "malformed";
    case Errc::io: return "io";
    case Errc::not_found: return "not-found";
    case Errc::conflict: return "conflict";
    case Errc::bundle_kinds: return "duplicate-or-missing-kind";
    case Errc::invalid_manifest: return "invalid-manifest";
    case Errc::checksum_mismatch: return "checksum-mismatch";
    case Errc::unreachable: return "unreachable";
    case Errc::unsupported_scheme: return "unsupported-scheme";
    case Errc::unpack_failed: return "unpack-failed";
    case Errc::gate_failed: return "gate-failed";
    case Errc::command_failed: return "command-failed";
    case Errc::engine_missing: return "engine-missing";
    case Errc::image_not_found: return "image-not-found";
    case Errc::mount_source_missing: return "mount-source-missing";
    case Errc::launch_failed: return "launch-failed";
    case Errc::spawn_failure: return "spawn-failure";
    case Errc::handshake_timeout: return "handshake-timeout";
    case Errc::protocol_mismatch: return "protocol-mismatch";
    case Errc::protocol_violation: return "protocol-violation";
    case Errc::terminated_handle: return "terminated-handle";
    case Errc::stage_failed: return "stage-failed";
    case Errc::compile_error: return "compile-error";
    case Errc::record_failed: return "record-failed";
    case Errc::fetch_failed: return "fetch-failed";
  }
  return "unknown";
}

}  // namespace dlspec
