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

#include <atomic>
#include <cstdint>

namespace dlspec {

/// Call counts observed by tests and by `--format json` output.
struct Counters {
  std::atomic<std::uint64_t> fetch_requests{0};
  std::atomic<std::uint64_t> transfers{0};  // transport calls (network or file copy)
  std::atomic<std::uint64_t> cache_hits{0};
  std::atomic<std::uint64_t> evictions{0};
  std::atomic<std::uint64_t> launches{0};
  std::atomic<std::uint64_t> engine_invocations{0};
  std::atomic<std::uint64_t> setup_commands{0};
  std::atomic<std::uint64_t> stage_runs{0};  // RUN messages sent to a worker
};

}  // namespace dlspec
