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

#include <filesystem>

#include "dlspec/manifest.hpp"

namespace dlspec {

/// Extracts `archive` into `dest` (created if needed). Entries whose path
/// is absolute or climbs out of `dest` make the whole unpack fail, as do
/// links pointing outside it. Returns the number of regular files written.
///
/// Throws Error(unpack_failed).
std::size_t unpack_archive(const std::filesystem::path& archive, Unpack kind,
                           const std::filesystem::path& dest);

}  // namespace dlspec
