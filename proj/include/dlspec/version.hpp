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

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dlspec {

/// Semantic version `major.minor.patch[-prerelease]`.
///
/// Build metadata (`+...`) is not part of a manifest identity and is
/// rejected by parse_version. Ordering follows semver precedence: numeric on
/// the release triple, a prerelease sorts below its release, and prerelease
/// identifiers compare numerically when both are numeric, lexically
/// otherwise, with numeric identifiers below alphanumeric ones.
struct Version {
  std::uint64_t major = 0;
  std::uint64_t minor = 0;
  std::uint64_t patch = 0;
  std::vector<std::string> prerelease;

  std::string to_string() const;

  friend bool operator==(const Version&, const Version&) = default;
  friend std::strong_ordering operator<=>(const Version& a, const Version& b);
};

/// Throws Error(Errc::malformed).
Version parse_version(std::string_view text);

/// `=x.y.z` (or bare `x.y.z`), `^x.y.z`, or `*`.
struct VersionRange {
  enum class Op { exact, caret, any };

  Op op = Op::any;
  Version base;

  std::string to_string() const;
  bool contains(const Version& v) const;

  friend bool operator==(const VersionRange&, const VersionRange&) = default;
};

/// Throws Error(Errc::malformed).
VersionRange parse_range(std::string_view text);

inline bool version_satisfies(const Version& v, const VersionRange& range) {
  return range.contains(v);
}

}  // namespace dlspec
