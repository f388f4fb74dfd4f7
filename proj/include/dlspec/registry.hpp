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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlspec/manifest.hpp"
#include "dlspec/version.hpp"

namespace dlspec {

/// A reference to a manifest by name and version range.
struct ManifestRef {
  Kind kind = Kind::hardware;
  std::string name;
  VersionRange range;  // defaults to "*"

  /// `kind:name@range`
  std::string to_string() const;
  friend bool operator==(const ManifestRef&, const ManifestRef&) = default;
};

/// Accepts `kind:name@range`, `kind:name`, and, when `kind` is given,
/// `name@range` or `name`. Throws Error(malformed).
ManifestRef parse_manifest_ref(std::string_view text, std::optional<Kind> kind = std::nullopt);

/// `kind: bundle` files list one `name@range` per kind. Throws
/// ManifestError.
std::vector<ManifestRef> parse_bundle_file(std::string_view text);
std::string serialize_bundle_file(std::span<const ManifestRef> refs);

/// Manifests stored as `<root>/<kind>/<name>/<version>.dlspec.yml`.
class Registry {
 public:
  explicit Registry(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path_for(const ManifestId& id) const;

  /// Stores the canonical text. Putting identical content again is a no-op.
  /// Throws ManifestError (invalid), Error(conflict) or Error(io).
  ManifestId put(const Manifest& manifest);

  /// Throws Error(not_found) or ManifestError when the stored file is bad.
  Manifest get(const ManifestId& id) const;

  /// Every stored version of (kind, name), ascending.
  std::vector<Version> versions(Kind kind, const std::string& name) const;
  std::vector<ManifestId> list() const;

  /// Highest version satisfying the range. Throws Error(not_found).
  Manifest resolve(Kind kind, const std::string& name, const VersionRange& range) const;
  Manifest resolve(const ManifestRef& ref) const;

  /// Exactly one ref per kind, else Error(bundle_kinds).
  TaskBundle resolve_bundle(std::span<const ManifestRef> refs) const;

 private:
  std::filesystem::path root_;
};

}  // namespace dlspec
