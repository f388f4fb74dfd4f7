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

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dlspec/counters.hpp"
#include "dlspec/error.hpp"

namespace dlspec {

class CommandRunner;
class Transport;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 1;  // violations, parse errors, unresolved refs
inline constexpr int gate = 2;
inline constexpr int fetch = 3;
inline constexpr int execution = 4;
inline constexpr int compare = 5;
inline constexpr int usage = 64;
}  // namespace exit_code

int exit_code_for(Errc code) noexcept;

/// Instrumentation for in-process callers. Everything may be null.
struct CliHooks {
  Counters* counters = nullptr;
  CommandRunner* runner = nullptr;
  std::shared_ptr<Transport> transport;
};

/// `args` excludes the program name. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliHooks& hooks = {});

}  // namespace dlspec
