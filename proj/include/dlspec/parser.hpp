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

// Text format for manifests and reference logs (`*.dlspec.yml`).
//
// Every document is a mapping with a `kind` key. Manifests carry `kind`,
// `name`, `version` and one section named after the kind:
//
//   kind: software
//   name: tf-cpu
//   version: 1.15.0
//   software:
//     container_image: tensorflow/tensorflow:1.15.0
//
// Reference logs use `kind: reference-log` and a `reference_log` section.
// Unknown keys are errors. Diagnostics are returned as Violation values
// keyed by a dotted field path such as `model.inputs[0].shape`.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlspec/error.hpp"
#include "dlspec/manifest.hpp"

namespace dlspec {

enum class Severity { error, warning };

std::string_view severity_name(Severity s) noexcept;

struct Violation {
  std::string path;
  std::string code;
  std::string message;
  Severity severity = Severity::error;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// The closed set of violation codes, in documentation order.
std::span<const std::string_view> violation_codes() noexcept;

bool has_errors(std::span<const Violation> violations) noexcept;

/// Raised by the parse_* functions; carries every structural problem found.
class ManifestError : public Error {
 public:
  explicit ManifestError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept {
    return violations_;
  }

 private:
  std::vector<Violation> violations_;
};

/// Structural parse: syntax, kind, unknown keys, required keys, scalar types.
/// Value-level invariants are left to validate().
Manifest parse_manifest(std::string_view text);
ReferenceLog parse_reference_log(std::string_view text);

/// Value invariants. Empty iff the manifest is valid; sorted by path.
std::vector<Violation> validate(const Manifest& manifest);
std::vector<Violation> validate(const ReferenceLog& log);

/// Deterministic canonical text.
std::string serialize(const Manifest& manifest);
std::string serialize(const ReferenceLog& log);

/// Cross-manifest checks on a composed bundle.
std::vector<Violation> validate_bundle(const TaskBundle& bundle);

/// Composition checks on a loose set of manifests: exactly one per kind,
/// then validate_bundle on the composed result.
std::vector<Violation> validate_composition(std::span<const Manifest> manifests);

/// Parse plus validate in one pass, for manifests and reference logs.
std::vector<Violation> lint(std::string_view text);

/// Value of the top-level `kind` key, if the text parses far enough.
std::string peek_kind(std::string_view text);

/// Required-field table. `[*]` stands for every element of a sequence.
struct RequiredField {
  std::string_view kind;
  std::string_view path;
};

std::span<const RequiredField> required_fields() noexcept;

}  // namespace dlspec
