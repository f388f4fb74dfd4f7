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

// Domain model for the four manifest kinds (hardware, software, dataset,
// model), the resources they reference, and reference logs. Everything here
// is plain data: no I/O, no parsing. Text form lives in parser.hpp.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dlspec/version.hpp"

namespace dlspec {

enum class Kind { hardware, software, dataset, model };

inline constexpr std::array<Kind, 4> kAllKinds = {
    Kind::hardware, Kind::software, Kind::dataset, Kind::model};

std::string_view kind_name(Kind kind) noexcept;
std::optional<Kind> parse_kind(std::string_view text) noexcept;

/// (kind, name, version) is the full identity of a manifest.
struct ManifestId {
  Kind kind = Kind::hardware;
  std::string name;
  Version version;

  /// `kind:name@version`
  std::string to_string() const;

  friend bool operator==(const ManifestId&, const ManifestId&) = default;
  friend auto operator<=>(const ManifestId&, const ManifestId&) = default;
};

/// Parses `kind:name@version`. Throws Error(Errc::malformed).
ManifestId parse_manifest_id(std::string_view text);

bool is_valid_manifest_name(std::string_view name) noexcept;

/// Scalars that appear in free-form maps (hyperparameters, host keys,
/// constraint values, author info).
using Scalar = std::variant<bool, std::int64_t, double, std::string>;

/// Display form used for textual comparison and diagnostics; numbers use the
/// shortest round-trip representation.
std::string scalar_text(const Scalar& value);
bool scalar_is_numeric(const Scalar& value) noexcept;
double scalar_number(const Scalar& value);

struct Checksum {
  std::string algorithm = "sha256";
  std::string digest;  // lowercase hex

  /// `algorithm:digest`
  std::string to_string() const;

  friend bool operator==(const Checksum&, const Checksum&) = default;
};

/// Accepts `sha256:<64 lowercase hex>`. Throws Error(Errc::malformed).
Checksum parse_checksum(std::string_view text);

enum class Unpack { none, tar, tar_gz, zip };

std::string_view unpack_name(Unpack u) noexcept;
std::optional<Unpack> parse_unpack(std::string_view text) noexcept;

struct ResourceRef {
  std::string url;
  Checksum checksum;
  Unpack unpack = Unpack::none;

  friend bool operator==(const ResourceRef&, const ResourceRef&) = default;
};

/// Returns the lowercase scheme (text before "://"), or empty when absent.
std::string url_scheme(std::string_view url);

enum class ConstraintOp { eq, ne, ge, le, in, matches };

std::string_view constraint_op_name(ConstraintOp op) noexcept;
std::optional<ConstraintOp> parse_constraint_op(std::string_view text) noexcept;

using ConstraintValue = std::variant<Scalar, std::vector<Scalar>>;

struct Constraint {
  std::string key;
  ConstraintOp op = ConstraintOp::eq;
  ConstraintValue value;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// A command executed on the host, outside the execution environment.
struct SetupCommand {
  std::vector<std::string> argv;
  bool must_succeed = true;
  std::string description;

  friend bool operator==(const SetupCommand&, const SetupCommand&) = default;
};

struct HardwareManifest {
  ManifestId id{Kind::hardware, {}, {}};
  std::vector<Constraint> constraints;
  std::vector<SetupCommand> setup;
  std::vector<SetupCommand> teardown;

  friend bool operator==(const HardwareManifest&,
                         const HardwareManifest&) = default;
};

struct SoftwareManifest {
  ManifestId id{Kind::software, {}, {}};
  std::string container_image;
  std::map<std::string, std::string> env;
  std::map<std::string, std::string> framework;  // inspection only

  friend bool operator==(const SoftwareManifest&,
                         const SoftwareManifest&) = default;
};

enum class Split { training, validation, test };

std::string_view split_name(Split s) noexcept;
std::optional<Split> parse_split(std::string_view text) noexcept;

/// Glob over the unpacked resource trees. `*` and `?` stay inside one path
/// segment, `**` crosses segments. The listing is sorted by relative path.
struct ElementListing {
  std::string glob = "**";

  friend bool operator==(const ElementListing&, const ElementListing&) = default;
};

struct DatasetManifest {
  ManifestId id{Kind::dataset, {}, {}};
  Split split = Split::test;
  std::vector<ResourceRef> resources;
  ElementListing element_listing;

  friend bool operator==(const DatasetManifest&,
                         const DatasetManifest&) = default;
};

enum class ElementType { float32, float64, int32, int64, uint8, string, bytes };

std::string_view element_type_name(ElementType t) noexcept;
std::optional<ElementType> parse_element_type(std::string_view text) noexcept;

/// One shape dimension; nullopt is the wildcard, written `"*"`.
using Dim = std::optional<std::int64_t>;

struct IOSpec {
  std::string name;
  ElementType element_type = ElementType::float32;
  std::optional<std::vector<Dim>> shape;
  std::optional<std::string> layout;

  friend bool operator==(const IOSpec&, const IOSpec&) = default;
};

enum class TaskKind { inference, training };

std::string_view task_kind_name(TaskKind k) noexcept;
std::optional<TaskKind> parse_task_kind(std::string_view text) noexcept;

inline constexpr std::string_view kStageLanguage = "python";

/// Source of one embedded `fun(ctx, data)` stage function.
struct StageCode {
  std::string language{kStageLanguage};
  std::string source;

  /// The body stored for an omitted pre- or post-processing stage.
  static StageCode identity();

  friend bool operator==(const StageCode&, const StageCode&) = default;
};

enum class Stage { pre_processing, run, post_processing };

inline constexpr std::array<Stage, 3> kAllStages = {
    Stage::pre_processing, Stage::run, Stage::post_processing};

std::string_view stage_name(Stage s) noexcept;
std::optional<Stage> parse_stage(std::string_view text) noexcept;

struct ModelManifest {
  ManifestId id{Kind::model, {}, {}};
  TaskKind task_kind = TaskKind::inference;
  std::vector<IOSpec> inputs;
  std::vector<IOSpec> outputs;
  std::vector<ResourceRef> artifacts;
  StageCode pre_processing = StageCode::identity();
  StageCode run;
  StageCode post_processing = StageCode::identity();
  std::map<std::string, Scalar> hyperparameters;

  const StageCode& stage(Stage s) const;

  friend bool operator==(const ModelManifest&, const ModelManifest&) = default;
};

using Manifest = std::variant<HardwareManifest, SoftwareManifest,
                              DatasetManifest, ModelManifest>;

const ManifestId& manifest_id(const Manifest& m);
Kind manifest_kind(const Manifest& m);

/// `kind:name@version`
std::string canonical_id(const Manifest& m);

/// One id per kind, addressable by Kind.
struct BundleIds {
  ManifestId hardware{Kind::hardware, {}, {}};
  ManifestId software{Kind::software, {}, {}};
  ManifestId dataset{Kind::dataset, {}, {}};
  ManifestId model{Kind::model, {}, {}};

  const ManifestId& at(Kind k) const;
  ManifestId& at(Kind k);

  friend bool operator==(const BundleIds&, const BundleIds&) = default;
};

struct TaskBundle {
  HardwareManifest hardware;
  SoftwareManifest software;
  DatasetManifest dataset;
  ModelManifest model;

  BundleIds ids() const;

  friend bool operator==(const TaskBundle&, const TaskBundle&) = default;
};

struct ReferenceLog {
  BundleIds bundle;
  std::map<std::string, double> metrics;
  std::optional<Checksum> expected_outputs;
  std::map<std::string, Scalar> author_info;
  std::string created_at;  // RFC 3339 UTC, e.g. 2026-10-14T09:30:00Z

  friend bool operator==(const ReferenceLog&, const ReferenceLog&) = default;
};

/// Current time as `YYYY-MM-DDTHH:MM:SSZ`.
std::string utc_timestamp_now();
bool is_valid_timestamp(std::string_view text) noexcept;

}  // namespace dlspec
